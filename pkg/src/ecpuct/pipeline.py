"""End-to-end processing: synthesize, compress, detect, extract features, write outputs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .datacube import Roi, ThermogramCube, parse_roi, reshape_to_matrix, roi_mean_series, sound_roi_for, write_tcube
from .excitation import ExcitationSignal, MatchedFilter, barker_code, expand_code, matched_filter
from .features import CrossingReport, crossing_points, max_snr, snr_curve, write_crossing_report
from .kpca import KpcaResult, run_kpca
from .lrs import LrsResult, component_maps, enhance_map, lrs_decompose
from .pulsecomp import CompressionWindow, DetrendConfig, compress_cube
from .synth import NotchSpec, PlateSpec, Scene, add_noise, simulate_cube

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoiSet:
    defect: Roi            # crossing analysis, defect side
    sound: Roi             # crossing analysis, reference
    snr: Roi               # SNR region on component images

    def as_meta(self) -> dict:
        return {"defect_roi": self.defect.to_spec(), "sound_roi": self.sound.to_spec(),
                "snr_roi": self.snr.to_spec()}


def rois_for_notch(plate: PlateSpec, notch: NotchSpec, sound_offset: int = 6) -> RoiSet:
    """ROIs around the lower end of a slot, on the column left of the slot plane.

    The crossing ROI is the three pixels centred on the slot end; the SNR
    ROI adds the next column outward, giving the usual 2 x 3 region.
    """
    f = notch.face_index(plate)
    y0, _ = notch.rows(plate)
    defect = Roi.rect(f - 1, y0 - 1, 1, 3)
    snr = Roi.rect(f - 2, y0 - 1, 2, 3)
    sound = sound_roi_for(defect, sound_offset, (plate.nx, plate.ny))
    return RoiSet(defect, sound, snr)


def resolve_rois(cfg: PipelineConfig, cube: ThermogramCube) -> RoiSet | None:
    """ROIs from the config, falling back to those recorded by ``synth``."""
    meta = cube.meta
    defect = cfg.defect_roi or (parse_roi(meta["defect_roi"]) if "defect_roi" in meta else None)
    snr = cfg.snr_roi or (parse_roi(meta["snr_roi"]) if "snr_roi" in meta else None)
    if defect is None or snr is None:
        return None
    sound = cfg.sound_roi
    if sound is None:
        sound = (parse_roi(meta["sound_roi"]) if "sound_roi" in meta and cfg.defect_roi is None
                 else sound_roi_for(defect, cfg.sound_offset, cube.frame_shape))
    return RoiSet(defect, sound, snr)


# --------------------------------------------------------------------------
# stages

def excitation_pair(order: int, bit_duration: float, fps: float) -> tuple[ExcitationSignal, MatchedFilter]:
    """Unipolar heater drive and the matched filter of its bipolar code."""
    bits = barker_code(order)
    drive = expand_code(bits, bit_duration, fps, "unipolar")
    return drive, matched_filter(expand_code(bits, bit_duration, fps, "bipolar"))


def synthesize(scene: Scene, seed: int = 0, t_h: float = 0.0) -> ThermogramCube:
    drive, _ = excitation_pair(scene.code_order, scene.bit_duration, scene.fps)
    cube = simulate_cube(scene.plate, scene.notches, scene.source, drive, scene.fps, scene.duration, t_h=t_h)
    cube = add_noise(cube, scene.netd, seed)
    meta = {"seed": str(seed), "netd": repr(float(scene.netd)), "code_order": str(scene.code_order),
            "bit_duration": repr(float(scene.bit_duration))}
    if len(scene.notches) == 1:
        n = scene.notches[0]
        meta.update({"depth_m": repr(float(n.depth)), "face": n.face, "label": n.label})
        meta.update(rois_for_notch(scene.plate, n).as_meta())
    return cube.with_frames(cube.frames, **meta)


def compress(raw: ThermogramCube, cfg: PipelineConfig) -> ThermogramCube:
    if raw.kind != "raw":
        raise ValueError(f"compression needs a raw cube, got kind={raw.kind!r}")
    _, psi = excitation_pair(cfg.code_order, cfg.bit_duration, raw.fps)
    return compress_cube(raw, psi, DetrendConfig(cfg.detrend_degree), CompressionWindow(cfg.t_h))


@dataclass(frozen=True, eq=False)
class Detection:
    name: str                 # "kpca" or "lrs"
    labels: list
    images: np.ndarray        # k x Nx x Ny
    snr: list                 # (value, component index) per component, then the best
    best: tuple
    raw: object = None

    def as_cube(self) -> ThermogramCube:
        return ThermogramCube(self.images, 1.0, "components")


def _component_snr(images: np.ndarray, roi: Roi, sigma_region: str, background: Roi | None):
    cube = ThermogramCube(images, 1.0, "components")
    curve = snr_curve(cube, roi, sigma_region, background)
    per = [float(v) for v in curve.values]
    return per, max_snr(curve)


def detect(h: ThermogramCube, cfg: PipelineConfig, rois: RoiSet | None) -> dict[str, Detection]:
    if h.kind != "impulse_response":
        raise ValueError(f"detection needs an impulse_response cube, got kind={h.kind!r}")
    if rois is None:
        raise ValueError("no SNR ROI: set rois.snr and rois.defect in the config or use a synth cube")
    Y = reshape_to_matrix(h)
    out = {}
    background = rois.sound if cfg.sigma_region == "background" else None
    if cfg.detector in ("kpca", "both"):
        res: KpcaResult = run_kpca(Y, cfg.kpca)
        per, best = _component_snr(res.component_images, rois.snr, cfg.sigma_region, background)
        out["kpca"] = Detection("kpca", res.names, res.component_images, per, best, res)
    if cfg.detector in ("lrs", "both"):
        lr: LrsResult = lrs_decompose(Y, cfg.lrs)
        images = component_maps(lr, cfg.map_mode)
        per, best = _component_snr(images, rois.snr, cfg.sigma_region, background)
        out["lrs"] = Detection("lrs", lr.names, images, per, best, lr)
    return out


def features(h: ThermogramCube, cfg: PipelineConfig, rois: RoiSet) -> tuple[CrossingReport, np.ndarray, np.ndarray]:
    h_def = roi_mean_series(h, rois.defect)
    h_sound = roi_mean_series(h, rois.sound)
    report = crossing_points(h_def, h_sound, start_eps=cfg.start_eps, superposition_tol=cfg.superposition_tol)
    return report.classified(cfg.mode), h_def, h_sound


# --------------------------------------------------------------------------
# full run

@dataclass(frozen=True, eq=False)
class PipelineResult:
    raw: ThermogramCube | None
    h: ThermogramCube
    rois: RoiSet
    detections: dict
    report: CrossingReport | None
    h_def: np.ndarray
    h_sound: np.ndarray
    feature_error: str | None = None
    manifest: dict = field(default_factory=dict)


def run_pipeline(raw: ThermogramCube, cfg: PipelineConfig) -> PipelineResult:
    rois = resolve_rois(cfg, raw)
    if rois is None:
        raise ValueError("no ROIs: set rois.defect and rois.snr in the config")
    h = compress(raw, cfg)
    detections = detect(h, cfg, rois)
    report, error = None, None
    try:
        report, h_def, h_sound = features(h, cfg, rois)
    except ValueError as exc:
        error = str(exc)
        h_def, h_sound = roi_mean_series(h, rois.defect), roi_mean_series(h, rois.sound)
    manifest = {
        "detector": cfg.detector, "mode": cfg.mode, "seed": cfg.seed,
        "detrend_degree": cfg.detrend_degree, "t_h": cfg.t_h, "code_order": cfg.code_order,
        "n_frames_raw": raw.n_frames, "n_lags": h.n_frames, **rois.as_meta(),
    }
    for key in ("depth_m", "label", "face"):
        if key in raw.meta:
            manifest[key] = raw.meta[key]
    for name, det in detections.items():
        manifest[f"{name}_max_snr"] = det.best[0]
        manifest[f"{name}_max_snr_component"] = det.labels[det.best[1]]
    if report is not None:
        manifest.update(regime=report.regime, depth_feature_frame=report.depth_feature_frame)
    else:
        manifest["feature_error"] = error
    return PipelineResult(raw, h, rois, detections, report, h_def, h_sound, error, manifest)


# --------------------------------------------------------------------------
# writers

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_manifest(path, items: dict) -> None:
    Path(path).write_text("".join(f"{k}={_fmt(v)}\n" for k, v in items.items()), encoding="utf-8", newline="\n")


def write_snr_table(path, detections: dict) -> None:
    lines = ["detector,component,max_snr"]
    for name, det in detections.items():
        for label, value in zip(det.labels, det.snr):
            lines.append(f"{name},{label},{_fmt(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_series_csv(path, h_def, h_sound, fps: float) -> None:
    lines = ["frame,time_s,h_defect,h_sound,difference"]
    for i, (a, b) in enumerate(zip(h_def, h_sound)):
        lines.append(f"{i},{_fmt(i / fps)},{_fmt(a)},{_fmt(b)},{_fmt(a - b)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_lrs_history(path, res: LrsResult) -> None:
    lines = ["iteration,objective,residual"]
    for i, (o, r) in enumerate(zip(res.objective_history, res.residual_history), 1):
        lines.append(f"{i},{_fmt(o)},{_fmt(r)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_detections(out: Path, detections: dict, cfg: PipelineConfig) -> list[Path]:
    written = []
    for name, det in detections.items():
        p = out / f"{name}_components.tcube"
        write_tcube(p, det.as_cube(), detector=name, components=",".join(det.labels))
        written.append(p)
        if name == "lrs":
            lr: LrsResult = det.raw
            write_lrs_history(out / "lrs_objective.csv", lr)
            img = enhance_map(lr, cfg.map_mode)
            write_tcube(out / "lrs_enhancement.tcube", ThermogramCube(img[None], 1.0, "components"),
                        map_mode=cfg.map_mode)
            written += [out / "lrs_objective.csv", out / "lrs_enhancement.tcube"]
    if detections:
        write_snr_table(out / "snr_table.csv", detections)
        written.append(out / "snr_table.csv")
    return written


def write_pipeline_outputs(result: PipelineResult, cfg: PipelineConfig, out) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result.raw is not None and result.raw.meta.get("source") == "synth":
        write_tcube(out / "raw.tcube", result.raw)
        written.append(out / "raw.tcube")
    write_tcube(out / "impulse_response.tcube", result.h)
    written.append(out / "impulse_response.tcube")
    written += write_detections(out, result.detections, cfg)
    write_series_csv(out / "roi_series.csv", result.h_def, result.h_sound, result.h.fps)
    written.append(out / "roi_series.csv")
    if result.report is not None:
        write_crossing_report(out / "crossing_report.txt", result.report)
        written.append(out / "crossing_report.txt")
    write_manifest(out / "manifest.txt", result.manifest)
    written.append(out / "manifest.txt")
    return written
