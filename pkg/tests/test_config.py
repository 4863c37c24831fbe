import pytest

from ecpuct.config import ConfigError, PipelineConfig, load_pipeline_config, load_scene, parse_yaml, pipeline_from_doc, scene_from_doc
from ecpuct.synth import straddle_coil_x


def scene(text):
    return scene_from_doc(parse_yaml(text, "scene.yaml"))


def pipe(text):
    return pipeline_from_doc(parse_yaml(text, "run.yaml"))


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as err:
        scene("plate:\n  nx: 16\n  colour: red\n")
    msg = str(err.value)
    assert "scene.yaml:3" in msg and "plate.colour" in msg and "unknown key" in msg


def test_bad_value_names_key():
    with pytest.raises(ConfigError, match=r"scene.yaml:2: acquisition.fps: must be > 0"):
        scene("acquisition:\n  fps: -5\n")


def test_notch_errors():
    with pytest.raises(ConfigError, match=r"notches\[0\].*missing required key 'depth'"):
        scene("notches:\n  - {x: 0.01, y: 0.01}\n")
    with pytest.raises(ConfigError, match=r"notches\[0\]"):
        scene("notches:\n  - {x: 0.5, y: 0.01, depth: 0.001}\n")


def test_invalid_yaml():
    with pytest.raises(ConfigError, match="invalid YAML"):
        scene("plate: [1, 2\n")


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        scene("- 1\n- 2\n")


def test_specimen_separate_and_multi():
    sf = scene("specimen: {face: subsurface}\nplate: {nx: 16, ny: 16}\n")
    assert len(sf.scenes) == 9 and all(len(s.notches) == 1 for s in sf.scenes)
    sf = scene("specimen: {face: surface, layout: multi}\nplate: {nx: 64, ny: 16}\n")
    assert len(sf.scenes) == 1 and len(sf.scenes[0].notches) == 9


def test_notches_and_specimen_exclusive():
    with pytest.raises(ConfigError, match="either"):
        scene("specimen: {}\nnotches: []\n")


def test_single_notch_straddles_coil():
    sf = scene("notches:\n  - {x: 0.01, y: 0.01, depth: 0.0004}\n")
    s = sf.scenes[0]
    assert s.source.coil_x == straddle_coil_x(s.plate, s.notches[0])
    sf = scene("notches:\n  - {x: 0.01, y: 0.01, depth: 0.0004}\nsource: {coil_x: 0.005}\n")
    assert sf.scenes[0].source.coil_x == 0.005


def test_scene_defaults():
    sf = scene("")
    assert sf.seed == 0 and len(sf.scenes) == 1
    s = sf.scenes[0]
    assert (s.fps, s.duration, s.code_order, s.bit_duration, s.netd) == (50.0, 43.0, 13, 1.0, 0.03)


def test_pipeline_defaults():
    cfg = load_pipeline_config()
    assert (cfg.code_order, cfg.bit_duration, cfg.fps, cfg.t_h, cfg.detrend_degree) == (13, 1.0, 50.0, 30.0, 3)
    assert cfg.detector == "both" and cfg.mode == "subsurface"


def test_pipeline_parse():
    cfg = pipe("detector: lrs\nrois:\n  defect: 31,26,1,3\n  snr: 30,26,2,3\nlrs: {p: 2.5, map_mode: projection}\n")
    assert cfg.detector == "lrs" and cfg.defect_roi.bbox == (31, 26, 1, 3)
    assert cfg.lrs.p == 2.5 and cfg.map_mode == "projection"


def test_pipeline_errors():
    with pytest.raises(ConfigError, match=r"run.yaml:1: detector: must be one of"):
        pipe("detector: svm\n")
    with pytest.raises(ConfigError, match=r"run.yaml:2: rois.defect"):
        pipe("rois:\n  defect: 1,2,3\n")
    with pytest.raises(ConfigError, match=r"lrs.bogus"):
        pipe("lrs:\n  bogus: 1\n")
    with pytest.raises(ConfigError, match="detrend_degree"):
        pipe("detrend_degree: 12\n")


def test_overrides_take_precedence():
    cfg = pipe("detector: lrs\nseed: 4\n")
    cfg = cfg.with_overrides(detector="kpca", seed=None)
    assert cfg.detector == "kpca" and cfg.seed == 4
    with pytest.raises(ConfigError):
        PipelineConfig().with_overrides(colour="red")
    with pytest.raises(ConfigError):
        PipelineConfig().with_overrides(mode="sideways")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_scene(tmp_path / "none.yaml")
