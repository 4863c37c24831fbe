"""Command-line front end: ``ecpuct {synth,compress,detect,features,pipeline}``.

Settings come from an optional YAML file and are overridden by flags.
Errors exit with status 1; a calibration verdict of FAIL is reported but
is not an error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_pipeline_config, load_scene
from .datacube import ThermogramCube, read_tcube, write_tcube
from .features import depth_calibration_table, write_calibration_csv, write_crossing_report
from .pipeline import (compress, detect, features, resolve_rois, run_pipeline, synthesize,
                       write_detections, write_manifest, write_pipeline_outputs, write_series_csv)
from .synth import StabilityError, build_model

log = logging.getLogger("ecpuct")


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers

def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba
    if not 1 <= n <= numba.config.NUMBA_NUM_THREADS:
        raise CliError(f"--threads must be in [1, {numba.config.NUMBA_NUM_THREADS}]")
    numba.set_num_threads(n)


def _config(args) -> PipelineConfig:
    cfg = load_pipeline_config(args.config)
    return cfg.with_overrides(out=args.out, seed=args.seed, detector=args.detector,
                              mode=args.mode, threads=args.threads)


def _read(path, expect: str | None = None) -> ThermogramCube:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{p}: no such file")
    cube = read_tcube(p)
    if expect is not None and cube.kind != expect:
        raise CliError(f"{p}: expected a {expect} cube, got kind={cube.kind!r}")
    return cube


def _stem(path) -> str:
    return Path(path).name.removesuffix(".tcube")


def _scene_name(scene, index: int) -> str:
    if len(scene.notches) == 1 and scene.notches[0].label:
        return scene.notches[0].label
    return "multi" if len(scene.notches) > 1 else f"scene{index + 1}"


def _calibrate(reports: list, out: Path) -> str | None:
    """Calibration table from ``(depth, report)`` pairs; returns the verdict."""
    runs = [(d, r.depth_feature_frame) for d, r in reports if d is not None and r is not None]
    if len(runs) < 3:
        if reports:
            log.info("calibration skipped: %d depth-labelled report(s), need 3", len(runs))
        return None
    table = depth_calibration_table(runs)
    write_calibration_csv(out / "calibration.csv", table)
    print(f"calibration: rho={table.rho:.4f} verdict={table.verdict}")
    return table.verdict


def _depth(cube: ThermogramCube) -> float | None:
    v = cube.meta.get("depth_m")
    return float(v) if v is not None else None


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> None:
    sf = load_scene(args.scene)
    seed = sf.seed if args.seed is None else args.seed
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    for i, scene in enumerate(sf.scenes):
        model = build_model(scene.plate, scene.notches, scene.source)
        p = scene.plate
        print(f"grid {p.nx}x{p.ny}x{p.nz}, spacing {', '.join(f'{s * 1e3:.4g}' for s in p.spacing)} mm, "
              f"dt_max {model.max_stable_dt():.4g} s")
        cube = synthesize(scene, seed, t_h=cfg.t_h)
        path = out / f"{_scene_name(scene, i)}.tcube"
        write_tcube(path, cube)
        print(f"wrote {path} ({cube.n_frames} frames, {cube.meta['substeps_per_frame']} steps/frame)")


def cmd_compress(args) -> None:
    cfg = _config(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for src in args.cubes:
        raw = _read(src)
        if raw.kind != "raw":
            raise CliError(f"{src}: compression needs a raw cube, got kind={raw.kind!r}")
        h = compress(raw, cfg)
        path = out / f"{_stem(src)}_h.tcube"
        write_tcube(path, h)
        print(f"wrote {path} ({h.n_frames} lags)")


def cmd_detect(args) -> None:
    cfg = _config(args)
    h = _read(args.cube, "impulse_response")
    rois = resolve_rois(cfg, h)
    if rois is None:
        raise CliError("no SNR ROI: set rois.defect and rois.snr in the config")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    dets = detect(h, cfg, rois)
    for path in write_detections(out, dets, cfg):
        print(f"wrote {path}")


def cmd_features(args) -> None:
    cfg = _config(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for src in args.cubes:
        h = _read(src, "impulse_response")
        rois = resolve_rois(cfg, h)
        if rois is None:
            raise CliError(f"{src}: no defect ROI: set rois.defect in the config")
        report, h_def, h_sound = features(h, cfg, rois)
        stem = _stem(src) if len(args.cubes) > 1 else "crossing"
        name = f"{stem}_report.txt" if len(args.cubes) > 1 else "crossing_report.txt"
        write_crossing_report(out / name, report, **rois.as_meta())
        write_series_csv(out / (f"{stem}_series.csv" if len(args.cubes) > 1 else "roi_series.csv"),
                         h_def, h_sound, h.fps)
        print(f"{src}: regime={report.regime} depth_feature_frame={report.depth_feature_frame:.3f}")
        reports.append((_depth(h), report))
    _calibrate(reports, out)


def cmd_pipeline(args) -> None:
    cfg = _config(args)
    if args.input is not None:
        cfg = cfg.with_overrides(input=args.input)
    if cfg.input is None:
        raise CliError("no input: give a scene file or raw cube, or set 'input' in the config")
    out = Path(cfg.out)
    src = Path(cfg.input)
    if not src.exists():
        raise CliError(f"{src}: no such file")
    if src.suffix == ".tcube":
        cubes = [(None, _read(src, "raw"))]
    else:
        sf = load_scene(src)
        seed = sf.seed if args.seed is None else cfg.seed
        cfg = cfg.with_overrides(seed=seed)
        cubes = [(_scene_name(s, i), synthesize(s, seed, t_h=cfg.t_h)) for i, s in enumerate(sf.scenes)]
    reports = []
    for name, raw in cubes:
        target = out if len(cubes) == 1 else out / name
        result = run_pipeline(raw, cfg)
        write_pipeline_outputs(result, cfg, target)
        m = result.manifest
        summary = " ".join(f"{k}={m[k]}" for k in ("regime", "depth_feature_frame", "kpca_max_snr",
                                                  "lrs_max_snr", "feature_error") if k in m)
        print(f"{name or src.name}: {summary}")
        reports.append((_depth(raw), result.report))
    verdict = _calibrate(reports, out)
    if verdict is not None:
        write_manifest(out / "calibration_manifest.txt", {"verdict": verdict, "runs": len(reports)})


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML settings file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="noise seed")
    common.add_argument("--detector", choices=("kpca", "lrs", "both"))
    common.add_argument("--mode", choices=("surface", "subsurface"))
    common.add_argument("--threads", type=int, metavar="N", help="numba worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="ecpuct", description="Eddy current pulse-compression thermography.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="simulate raw cubes from a scene file")
    p.add_argument("scene")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress", parents=[common], help="raw cube -> impulse-response cube")
    p.add_argument("cubes", nargs="+")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("detect", parents=[common], help="K-PCA / LRS component images and SNR table")
    p.add_argument("cube")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("features", parents=[common], help="crossing points, regime and calibration")
    p.add_argument("cubes", nargs="+")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("pipeline", parents=[common], help="all stages from a scene file or raw cube")
    p.add_argument("input", nargs="?")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _set_threads(args.threads)
        args.func(args)
    except (ConfigError, CliError, StabilityError, ValueError, OSError) as exc:
        print(f"ecpuct {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
