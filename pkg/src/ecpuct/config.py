"""YAML configuration files with schema checks and ``file:line`` error context.

Two documents are understood: a *scene* (what ``synth`` simulates) and a
*pipeline* config (how a cube is processed).  Unknown keys are rejected and
every error names the offending key and, when it comes from a file, its
line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .datacube import Roi, parse_roi
from .features import CARRIER_FREQUENCY, MODES, material_preset
from .kpca import KernelConfig
from .lrs import MAP_MODES, LrsConfig
from .synth import NotchSpec, PlateSpec, Scene, SourceModel, paper_specimen, spread_along_x, straddle_coil_x

DETECTORS = ("kpca", "lrs", "both")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str = "", source: str | None = None, line: int | None = None):
        where = source or "<config>"
        if line is not None:
            where += f":{line}"
        text = f"{where}: {key}: {message}" if key else f"{where}: {message}"
        super().__init__(text)
        self.key = key
        self.line = line


# --------------------------------------------------------------------------
# YAML with line numbers

class _Doc:
    """Parsed mapping plus the source line of every key path."""

    def __init__(self, data: dict, lines: dict, source: str | None):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(message, path, self.source, self.lines.get(path))


def _collect_lines(node, prefix: str, out: dict) -> None:
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _collect_lines(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            _collect_lines(v, path, out)


def parse_yaml(text: str, source: str | None = None) -> _Doc:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML ({getattr(exc, 'problem', exc)})", source=source,
                          line=mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source=source, line=1)
    lines: dict = {}
    _collect_lines(node, "", lines)
    return _Doc(data, lines, source)


def load_yaml(path) -> _Doc:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read file ({exc.strerror})", source=str(path)) from None
    return parse_yaml(text, str(path))


# --------------------------------------------------------------------------
# field checks

def _number(doc, path, v, *, positive=False, nonneg=False, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise doc.error(path, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise doc.error(path, f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise doc.error(path, f"must be > 0, got {v!r}")
    if nonneg and not v >= 0:
        raise doc.error(path, f"must be >= 0, got {v!r}")
    return int(v) if integer else float(v)


def _choice(doc, path, v, options):
    if v not in options:
        raise doc.error(path, f"must be one of {', '.join(map(str, options))}, got {v!r}")
    return v


def _mapping(doc, path, v, allowed) -> dict:
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise doc.error(path, f"expected a mapping, got {type(v).__name__}")
    for key in v:
        if key not in allowed:
            sub = f"{path}.{key}" if path else str(key)
            raise doc.error(sub, f"unknown key (allowed: {', '.join(sorted(allowed))})")
    return v


def _roi(doc, path, v):
    if v is None:
        return None
    try:
        return parse_roi(str(v))
    except ValueError as exc:
        raise doc.error(path, str(exc)) from None


# --------------------------------------------------------------------------
# scene

_SCENE_KEYS = {"material", "plate", "notches", "specimen", "source", "excitation", "acquisition", "seed"}
_PLATE_KEYS = {"lx", "ly", "nx", "ny", "nz", "ambient_temp"}
_NOTCH_KEYS = {"x", "y", "depth", "face", "length", "width", "label"}
_SPECIMEN_KEYS = {"face", "layout"}
_SOURCE_KEYS = {"carrier_frequency", "coil_x", "coil_y", "coil_width", "coil_spread",
                "power_density", "tip_enhancement_factor", "footprint"}
_EXC_KEYS = {"order", "bit_duration"}
_ACQ_KEYS = {"fps", "duration", "netd"}


@dataclass(frozen=True)
class SceneFile:
    scenes: tuple          # one Scene per output cube
    seed: int = 0


def scene_from_doc(doc: _Doc) -> SceneFile:
    d = _mapping(doc, "", doc.data, _SCENE_KEYS)
    try:
        material = material_preset(d.get("material", "al2024-t3"))
    except ValueError as exc:
        raise doc.error("material", str(exc)) from None

    pd = _mapping(doc, "plate", d.get("plate"), _PLATE_KEYS)
    plate_kw = {}
    for k in ("lx", "ly", "ambient_temp"):
        if k in pd:
            plate_kw[k] = _number(doc, f"plate.{k}", pd[k], positive=True)
    for k in ("nx", "ny", "nz"):
        if k in pd:
            plate_kw[k] = _number(doc, f"plate.{k}", pd[k], positive=True, integer=True)
    try:
        plate = PlateSpec(material=material, **plate_kw)
    except ValueError as exc:
        raise doc.error("plate", str(exc)) from None

    if "notches" in d and "specimen" in d:
        raise doc.error("specimen", "give either 'notches' or 'specimen', not both")
    groups: list[tuple] = []
    if "specimen" in d:
        sd = _mapping(doc, "specimen", d["specimen"], _SPECIMEN_KEYS)
        face = _choice(doc, "specimen.face", sd.get("face", "subsurface"), MODES)
        layout = _choice(doc, "specimen.layout", sd.get("layout", "separate"), ("separate", "multi"))
        _, notches = paper_specimen(face, plate)
        if layout == "multi":
            groups.append(tuple(spread_along_x(notches, plate)))
        else:
            groups.extend((n,) for n in notches)
    else:
        raw = d.get("notches", [])
        if not isinstance(raw, list):
            raise doc.error("notches", "expected a list")
        notches = []
        for i, item in enumerate(raw):
            p = f"notches[{i}]"
            nd = _mapping(doc, p, item, _NOTCH_KEYS)
            for req in ("x", "y", "depth"):
                if req not in nd:
                    raise doc.error(p, f"missing required key '{req}'")
            kw = {k: _number(doc, f"{p}.{k}", nd[k], positive=True)
                  for k in ("x", "y", "depth", "length", "width") if k in nd}
            if "face" in nd:
                kw["face"] = _choice(doc, f"{p}.face", nd["face"], MODES)
            kw["label"] = str(nd.get("label", f"N{i + 1}"))
            try:
                notch = NotchSpec(**kw)
                notch.check_inside(plate)
            except ValueError as exc:
                raise doc.error(p, str(exc)) from None
            notches.append(notch)
        groups.append(tuple(notches))

    sd = _mapping(doc, "source", d.get("source"), _SOURCE_KEYS)
    f_carrier = _number(doc, "source.carrier_frequency", sd.get("carrier_frequency", CARRIER_FREQUENCY),
                        positive=True)
    src_kw = {"coil_x": plate.lx / 2, "coil_y": plate.ly / 2}
    if all(len(g) == 1 for g in groups) and len({(g[0].x, g[0].y) for g in groups}) == 1:
        # single-defect scenes: straddle the defect and sound columns
        src_kw = {"coil_x": straddle_coil_x(plate, groups[0][0]), "coil_y": groups[0][0].y}
    for k in ("coil_x", "coil_y", "coil_width", "coil_spread", "power_density"):
        if k in sd:
            src_kw[k] = _number(doc, f"source.{k}", sd[k], positive=True)
    if "tip_enhancement_factor" in sd:
        src_kw["tip_enhancement_factor"] = _number(doc, "source.tip_enhancement_factor",
                                                   sd["tip_enhancement_factor"], positive=True)
    if "footprint" in sd:
        src_kw["footprint"] = _choice(doc, "source.footprint", sd["footprint"], ("line", "uniform"))
    try:
        source = SourceModel.for_material(material, f_carrier, **src_kw)
    except ValueError as exc:
        raise doc.error("source", str(exc)) from None

    ed = _mapping(doc, "excitation", d.get("excitation"), _EXC_KEYS)
    order = _number(doc, "excitation.order", ed.get("order", 13), positive=True, integer=True)
    bit = _number(doc, "excitation.bit_duration", ed.get("bit_duration", 1.0), positive=True)
    ad = _mapping(doc, "acquisition", d.get("acquisition"), _ACQ_KEYS)
    fps = _number(doc, "acquisition.fps", ad.get("fps", 50.0), positive=True)
    duration = _number(doc, "acquisition.duration", ad.get("duration", 43.0), positive=True)
    netd = _number(doc, "acquisition.netd", ad.get("netd", 0.03), nonneg=True)
    seed = _number(doc, "seed", d.get("seed", 0), nonneg=True, integer=True)

    scenes = tuple(Scene(plate, g, source, fps=fps, duration=duration, netd=netd,
                         code_order=order, bit_duration=bit) for g in groups)
    return SceneFile(scenes, seed)


def load_scene(path) -> SceneFile:
    return scene_from_doc(load_yaml(path))


# --------------------------------------------------------------------------
# pipeline

_PIPE_KEYS = {"input", "out", "excitation", "detrend_degree", "t_h", "detector", "kpca", "lrs",
              "rois", "features", "mode", "seed", "threads"}
_PEXC_KEYS = {"order", "bit_duration", "fps"}
_KPCA_KEYS = {"n_components", "sigma", "kernel"}
_LRS_KEYS = {"p", "phi_m", "phi_n", "sparse_rank", "max_iter", "tol", "sparse_model", "zeta",
             "zeta_scale", "map_mode"}
_ROI_KEYS = {"defect", "sound", "snr", "sound_offset"}
_FEAT_KEYS = {"start_eps", "superposition_tol", "sigma_region"}


@dataclass(frozen=True)
class PipelineConfig:
    input: str | None = None
    out: str = "out"
    code_order: int = 13
    bit_duration: float = 1.0
    fps: float = 50.0
    detrend_degree: int = 3
    t_h: float = 30.0
    detector: str = "both"
    kpca: KernelConfig = KernelConfig()
    lrs: LrsConfig = LrsConfig(sparse_rank=4, tol=1e-4)
    map_mode: str = "sparse_energy"
    defect_roi: Roi | None = None
    sound_roi: Roi | None = None
    snr_roi: Roi | None = None
    sound_offset: int = 6
    start_eps: float = 3.0
    superposition_tol: float = 0.008
    sigma_region: str = "defect"
    mode: str = "subsurface"
    seed: int = 0
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        names = {f.name for f in fields(self)}
        unknown = set(kw) - names
        if unknown:
            raise ConfigError(f"unknown override(s) {sorted(unknown)}")
        out = replace(self, **kw)
        _validate(out)
        return out


def _validate(cfg: PipelineConfig) -> None:
    if cfg.detector not in DETECTORS:
        raise ConfigError(f"must be one of {DETECTORS}", "detector")
    if cfg.mode not in MODES:
        raise ConfigError(f"must be one of {MODES}", "mode")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("must be >= 1", "threads")
    if cfg.seed < 0:
        raise ConfigError("must be >= 0", "seed")


def pipeline_from_doc(doc: _Doc) -> PipelineConfig:
    d = _mapping(doc, "", doc.data, _PIPE_KEYS)
    kw: dict[str, Any] = {}
    if "input" in d:
        kw["input"] = str(d["input"])
    if "out" in d:
        kw["out"] = str(d["out"])
    ed = _mapping(doc, "excitation", d.get("excitation"), _PEXC_KEYS)
    if "order" in ed:
        kw["code_order"] = _number(doc, "excitation.order", ed["order"], positive=True, integer=True)
    if "bit_duration" in ed:
        kw["bit_duration"] = _number(doc, "excitation.bit_duration", ed["bit_duration"], positive=True)
    if "fps" in ed:
        kw["fps"] = _number(doc, "excitation.fps", ed["fps"], positive=True)
    if "detrend_degree" in d:
        kw["detrend_degree"] = _number(doc, "detrend_degree", d["detrend_degree"], positive=True, integer=True)
        if not 1 <= kw["detrend_degree"] <= 10:
            raise doc.error("detrend_degree", "must be in 1..10")
    if "t_h" in d:
        kw["t_h"] = _number(doc, "t_h", d["t_h"], positive=True)
    if "detector" in d:
        kw["detector"] = _choice(doc, "detector", d["detector"], DETECTORS)
    if "mode" in d:
        kw["mode"] = _choice(doc, "mode", d["mode"], MODES)
    if "seed" in d:
        kw["seed"] = _number(doc, "seed", d["seed"], nonneg=True, integer=True)
    if "threads" in d:
        kw["threads"] = _number(doc, "threads", d["threads"], positive=True, integer=True)

    kd = _mapping(doc, "kpca", d.get("kpca"), _KPCA_KEYS)
    if kd:
        kk = {}
        if "n_components" in kd:
            kk["n_components"] = _number(doc, "kpca.n_components", kd["n_components"], positive=True, integer=True)
        if "sigma" in kd:
            kk["sigma"] = "median" if kd["sigma"] == "median" else _number(doc, "kpca.sigma", kd["sigma"], positive=True)
        if "kernel" in kd:
            kk["kernel"] = _choice(doc, "kpca.kernel", kd["kernel"], ("gaussian", "linear"))
        kw["kpca"] = KernelConfig(**kk)

    ld = _mapping(doc, "lrs", d.get("lrs"), _LRS_KEYS)
    if ld:
        lk: dict[str, Any] = {"sparse_rank": 4, "tol": 1e-4}
        for k in ("p", "zeta"):
            if k in ld:
                lk[k] = _number(doc, f"lrs.{k}", ld[k], nonneg=True, allow_none=True)
        for k in ("phi_m", "phi_n", "tol", "zeta_scale"):
            if k in ld:
                lk[k] = _number(doc, f"lrs.{k}", ld[k], nonneg=True)
        for k in ("sparse_rank", "max_iter"):
            if k in ld:
                lk[k] = _number(doc, f"lrs.{k}", ld[k], positive=True, integer=True)
        if "sparse_model" in ld:
            lk["sparse_model"] = _choice(doc, "lrs.sparse_model", ld["sparse_model"], ("elementwise", "factor"))
        if "map_mode" in ld:
            kw["map_mode"] = _choice(doc, "lrs.map_mode", ld["map_mode"], MAP_MODES)
        kw["lrs"] = LrsConfig(**lk)

    rd = _mapping(doc, "rois", d.get("rois"), _ROI_KEYS)
    for k, name in (("defect", "defect_roi"), ("sound", "sound_roi"), ("snr", "snr_roi")):
        if k in rd:
            kw[name] = _roi(doc, f"rois.{k}", rd[k])
    if "sound_offset" in rd:
        kw["sound_offset"] = _number(doc, "rois.sound_offset", rd["sound_offset"], nonneg=True, integer=True)

    fd = _mapping(doc, "features", d.get("features"), _FEAT_KEYS)
    if "start_eps" in fd:
        kw["start_eps"] = _number(doc, "features.start_eps", fd["start_eps"], nonneg=True)
    if "superposition_tol" in fd:
        kw["superposition_tol"] = _number(doc, "features.superposition_tol", fd["superposition_tol"], nonneg=True)
    if "sigma_region" in fd:
        kw["sigma_region"] = _choice(doc, "features.sigma_region", fd["sigma_region"], ("defect", "background"))
    cfg = PipelineConfig(**kw)
    _validate(cfg)
    return cfg


def load_pipeline_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return pipeline_from_doc(load_yaml(path))
