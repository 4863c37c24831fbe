import numpy as np
import pytest

from ecpuct.datacube import ThermogramCube
from ecpuct.excitation import BitSequence, barker_code, expand_code
from ecpuct.synth import (NotchSpec, PlateSpec, SourceModel, StabilityError, add_noise, build_model,
                          paper_specimen, reference_scene, simulate_cube, spread_along_x, straddle_coil_x)

FPS = 50.0


def small_plate(n=16, nz=4):
    return PlateSpec(nx=n, ny=n, nz=nz)


def src(plate, **kw):
    return SourceModel.for_material(plate.material, coil_x=plate.lx / 2, coil_y=plate.ly / 2, **kw)


def pulse(seconds=1.0):
    return expand_code(BitSequence((1,)), seconds, FPS, "unipolar")


def test_zero_excitation_constant_at_ambient():
    plate = small_plate()
    exc = expand_code(BitSequence((-1,)), 1.0, FPS, "unipolar")  # heater off throughout
    cube = simulate_cube(plate, [], src(plate), exc, FPS, 2.0)
    assert np.all(cube.frames == plate.ambient_temp)


def test_uniform_footprint_no_notch_is_laterally_uniform():
    plate = small_plate()
    cube = simulate_cube(plate, [], src(plate, footprint="uniform"), pulse(), FPS, 2.0)
    f = cube.frames
    np.testing.assert_allclose(f, np.broadcast_to(f[:, :1, :1], f.shape), rtol=0, atol=1e-12)
    assert f[-1, 0, 0] > plate.ambient_temp


def test_energy_conserved_after_drive():
    plate = small_plate()
    cube, energy = simulate_cube(plate, [], src(plate), pulse(0.5), FPS, 6.0, return_energy=True)
    steps = int(cube.meta["substeps_per_frame"])
    after = energy[30:]  # drive ends at frame 25
    drift = np.abs(after - after[0]).max() / after[0]
    n_steps = (after.size - 1) * steps
    assert drift / n_steps * 1000 < 1e-6


def test_energy_matches_injected_heat():
    plate = small_plate()
    source = src(plate)
    cube, energy = simulate_cube(plate, [], source, pulse(0.5), FPS, 2.0, return_energy=True)
    model = build_model(plate, [], source)
    injected = model.source.sum() * plate.cell_volume * 0.5
    assert energy[-1] == pytest.approx(injected, rel=1e-9)


def test_linear_in_power():
    plate = small_plate()
    notch = NotchSpec(plate.lx / 2, plate.ly / 2, 0.4e-3)
    a = simulate_cube(plate, [notch], src(plate), pulse(), FPS, 2.0).frames - plate.ambient_temp
    b = simulate_cube(plate, [notch], src(plate, power_density=1e9), pulse(), FPS, 2.0).frames - plate.ambient_temp
    np.testing.assert_allclose(b, 2 * a, rtol=1e-9, atol=1e-12)


def test_explicit_unstable_dt():
    plate = small_plate()
    with pytest.raises(StabilityError) as err:
        simulate_cube(plate, [], src(plate), pulse(), FPS, 2.0, dt=0.02)
    assert err.value.dt_max < 0.02 and "maximum stable dt" in str(err.value)


def test_rejects_bipolar_drive():
    plate = small_plate()
    code = expand_code(barker_code(5), 0.2, FPS, "bipolar")
    with pytest.raises(ValueError):
        simulate_cube(plate, [], src(plate), code, FPS, 2.0)


def test_duration_too_short():
    plate = small_plate()
    with pytest.raises(ValueError, match="shorter"):
        simulate_cube(plate, [], src(plate), pulse(2.0), FPS, 1.0)


def test_notch_must_fit():
    plate = small_plate()
    with pytest.raises(ValueError):
        build_model(plate, [NotchSpec(0.0, plate.ly / 2, 1e-3)], src(plate))
    with pytest.raises(ValueError):
        build_model(plate, [NotchSpec(plate.lx / 2, plate.ly / 2, 5e-3)], src(plate))


def test_notch_blocks_heat_flow():
    plate = small_plate()
    notch = NotchSpec(plate.lx / 2, plate.ly / 2, plate.thickness, face="surface")
    model = build_model(plate, [notch], src(plate))
    f = notch.face_index(plate)
    y0, y1 = notch.rows(plate)
    assert not model.conductance[0][:, f - 1, y0:y1].any()
    assert model.conductance[0][:, f - 1, :y0].all()
    assert model.fill.min() < 1


def test_noise():
    cube = ThermogramCube(np.zeros((200, 8, 8)), FPS)
    assert add_noise(cube, 0.0) is cube
    a, b = add_noise(cube, 0.03, 5), add_noise(cube, 0.03, 5)
    assert np.array_equal(a.frames, b.frames)
    assert a.frames.std() == pytest.approx(0.03, rel=0.05)
    assert not np.array_equal(a.frames, add_noise(cube, 0.03, 6).frames)
    with pytest.raises(ValueError):
        add_noise(cube, -1.0)


def test_specimen_depths():
    plate, sub = paper_specimen("subsurface")
    depths = {n.label: n.depth for n in sub}
    assert depths["D8"] == pytest.approx(0.20e-3) and depths["D1"] == pytest.approx(1.60e-3)
    assert depths["D9"] == plate.thickness
    _, surf = paper_specimen("surface")
    assert surf[0].depth == pytest.approx(0.40e-3) and surf[0].face == "surface"
    spread = spread_along_x(sub, plate)
    assert len({n.x for n in spread}) == len(sub)


def test_straddle_coil():
    sc = reference_scene(0.4e-3)
    plate, notch = sc.plate, sc.notches[0]
    dx = plate.spacing[0]
    defect_centre = (notch.face_index(plate) - 0.5) * dx
    assert sc.source.coil_x - defect_centre == pytest.approx(3 * dx)
    assert straddle_coil_x(plate, notch) == sc.source.coil_x


def _defect_run(plate, notch, exc, duration):
    source = SourceModel.for_material(plate.material, coil_x=straddle_coil_x(plate, notch), coil_y=notch.y)
    return simulate_cube(plate, [notch], source, exc, FPS, duration).frames, source


def _contrast(depth):
    # |notched - sound| averaged over the slot rows of the defect column, after the drive ends
    plate = PlateSpec()
    notch = NotchSpec(plate.lx / 2, plate.ly / 2, depth)
    exc = pulse(1.0)
    with_notch, source = _defect_run(plate, notch, exc, 4.0)
    sound = simulate_cube(plate, [], source, exc, FPS, 4.0).frames
    y0, y1 = notch.rows(plate)
    d = np.abs((with_notch - sound)[50:, notch.face_index(plate) - 1, y0:y1].mean(axis=1))
    return d.max(), int(np.argmax(d))


def test_deeper_notch_weaker_and_later():
    # D8 .. D4 of the subsurface specimen
    peaks, times = zip(*(_contrast(d) for d in (0.2e-3, 0.4e-3, 0.6e-3, 0.8e-3, 1.0e-3)))
    assert all(a > b for a, b in zip(peaks, peaks[1:])) and peaks[-1] > 0
    assert all(a <= b for a, b in zip(times, times[1:])) and times[0] < times[-1]


def test_grid_refinement_in_plan():
    # peak rise at the defect pixel, 64x64 versus 128x128 (2x2 block average)
    exc = pulse(1.0)
    coarse = PlateSpec()
    notch = NotchSpec(coarse.lx / 2, coarse.ly / 2, 0.4e-3)
    fine = PlateSpec(nx=128, ny=128)
    c, _ = _defect_run(coarse, notch, exc, 3.0)
    f, _ = _defect_run(fine, notch, exc, 3.0)
    f = f.reshape(f.shape[0], 64, 2, 64, 2).mean(axis=(2, 4))
    x = notch.face_index(coarse) - 1
    y0, _ = notch.rows(coarse)
    rise_c = c[:, x, y0].max() - coarse.ambient_temp
    rise_f = f[:, x, y0].max() - fine.ambient_temp
    assert abs(rise_f - rise_c) / rise_c < 0.05


def test_layer_refinement():
    def run(nz):
        plate = small_plate(8, nz)
        return simulate_cube(plate, [], src(plate, footprint="uniform"), pulse(), FPS, 3.0).frames[:, 0, 0]
    coarse, fine, finer = run(8), run(16), run(32)
    rise = finer - finer[0]
    assert np.max(np.abs(fine - finer)) / rise.max() < 0.05
    assert np.max(np.abs(fine - finer)) < np.max(np.abs(coarse - finer))
