"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line (see ``conftest.py``); the lines are
repeated in the terminal summary.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import time

import numpy as np
import pytest
from scipy.linalg import subspace_angles
from scipy.stats import spearmanr

from ecpuct.config import PipelineConfig
from ecpuct.datacube import PixelMatrix
from ecpuct.excitation import BitSequence, barker_code, expand_code, matched_filter, peak_sidelobe_ratio, virtual_delta
from ecpuct.features import ALUMINIUM_2024_T3, BEYOND, COOLING, WITHIN
from ecpuct.kpca import center_kernel, kpca_components, linear_kernel_matrix
from ecpuct.lrs import LrsConfig, lrs_decompose, svt
from ecpuct.pipeline import run_pipeline, synthesize, write_pipeline_outputs
from ecpuct.pulsecomp import CompressionWindow, pulse_compress
from ecpuct.synth import reference_scene, simulate_cube

FPS = 50.0
DEPTHS_MM = (0.2, 0.4, 0.6, 0.8, 1.0)
SEED = 0


def run_depth(depth_mm, out=None):
    t0 = time.perf_counter()
    cfg = PipelineConfig(seed=SEED)
    raw = synthesize(reference_scene(depth_mm * 1e-3), seed=SEED, t_h=cfg.t_h)
    result = run_pipeline(raw, cfg)
    if out is not None:
        write_pipeline_outputs(result, cfg, out)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    t0 = time.perf_counter()
    runs = {}
    for d in DEPTHS_MM:
        runs[d] = run_depth(d, root / f"{d:.1f}")
    return {"runs": runs, "root": root, "seconds": time.perf_counter() - t0}


def test_c01_barker_sidelobes(criterion):
    t0 = time.perf_counter()
    bits = barker_code(13)
    s1 = expand_code(bits, 1.0, 1.0)
    lags, v = virtual_delta(s1, matched_filter(s1))
    bit_ratio = peak_sidelobe_ratio(v, lags)
    s50 = expand_code(bits, 1.0, FPS)
    lags, v = virtual_delta(s50, matched_filter(s50))
    padded = peak_sidelobe_ratio(v, lags, mainlobe_halfwidth=49)
    dt = time.perf_counter() - t0
    ok = bit_ratio == 13.0 and padded >= 13 * 0.99 and dt < 1.0
    assert criterion(1, ok, f"bit-level ratio {bit_ratio:.6g}, padded ratio {padded:.6g}, {dt:.3f} s")


def test_c02_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    n = int(43 * FPS)
    t = np.arange(n) / FPS
    h = np.exp(-t / 5.0) - np.exp(-t / 0.5)
    code = expand_code(barker_code(13), 1.0, FPS)
    psi = matched_filter(code)
    clean = np.convolve(code.samples, h)[:n]
    noise_std = np.sqrt(np.mean(clean**2) / 10.0)  # 10 dB
    win = CompressionWindow(30.0)
    scores = []
    for seed in range(100):
        y = clean + np.random.default_rng(seed).normal(0.0, noise_std, n)
        est = pulse_compress(y, psi, win)
        ref = h[:est.size]
        a, b = est - est.mean(), ref - ref.mean()
        scores.append(a @ b / np.linalg.norm(a) / np.linalg.norm(b))
    mean = float(np.mean(scores))
    dt = time.perf_counter() - t0
    ok = mean >= 0.98 and dt < 10
    assert criterion(2, ok, f"mean NCC {mean:.4f} over 100 seeds (needs >= 0.98), {dt:.2f} s")


def test_c03_skin_depth(criterion):
    d = ALUMINIUM_2024_T3.skin_depth(270e3)
    rel = abs(d - 0.22e-3) / 0.22e-3
    ok = abs(d - 0.223e-3) < 0.5e-6 and rel <= 0.05
    assert criterion(3, ok, f"delta = {d * 1e3:.4f} mm, {100 * rel:.2f}% from 0.22 mm")


def test_c04_linear_kpca_is_pca(criterion):
    t0 = time.perf_counter()
    X = np.random.default_rng(4).normal(size=(40, 60))
    Xc = X - X.mean(axis=0)
    _, alphas = kpca_components(center_kernel(linear_kernel_matrix(X)), 4)
    _, evecs = np.linalg.eigh(Xc.T @ Xc)
    angle = float(np.max(subspace_angles(Xc.T @ alphas, evecs[:, ::-1][:, :4])))
    dt = time.perf_counter() - t0
    ok = angle < 1e-6 and dt < 1
    assert criterion(4, ok, f"largest principal angle {angle:.2e} rad, {dt:.3f} s")


def test_c05_lrs_recovery(criterion):
    t0 = time.perf_counter()
    worst_f1, worst_err, monotone = 1.0, 0.0, True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        L0 = rng.normal(size=(50, 2)) @ rng.normal(size=(2, 80))
        amp = 10 * np.mean(np.abs(L0))
        S0 = np.zeros_like(L0)
        idx = rng.choice(L0.size, L0.size // 100, replace=False)
        S0.flat[idx] = amp * rng.choice([-1.0, 1.0], idx.size)
        Y = L0 + S0
        r = lrs_decompose(PixelMatrix(Y, 5, 16), LrsConfig(p=0.4 * np.linalg.norm(Y, 2), max_iter=200, tol=1e-12))
        found, truth = np.abs(r.S) > amp / 2, S0 != 0
        f1 = 2 * np.sum(found & truth) / (found.sum() + truth.sum())
        worst_f1 = min(worst_f1, f1)
        worst_err = max(worst_err, np.linalg.norm(r.L - L0) / np.linalg.norm(L0))
        h = r.objective_history
        monotone &= bool(np.all(np.diff(h) <= 1e-9 * np.abs(h[:-1])))
    dt = time.perf_counter() - t0
    ok = worst_f1 >= 0.95 and worst_err <= 1e-2 and monotone and dt < 30
    assert criterion(5, ok, f"10 draws, p = 0.4|Y|_2: min F1 {worst_f1:.3f}, max L error {worst_err:.1e}, "
                            f"objective non-increasing {monotone}, {dt:.2f} s")


def test_c06_svt_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        m, n = rng.integers(2, 40, size=2)
        A = rng.normal(size=(m, n)) * rng.uniform(0.1, 10)
        s = np.linalg.svd(A, compute_uv=False)
        tau = rng.uniform(0, s[0])
        out = np.linalg.svd(svt(A, tau), compute_uv=False)
        worst = max(worst, float(np.max(np.abs(out - np.maximum(s - tau, 0)))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 5
    assert criterion(6, ok, f"max singular value error {worst:.1e} over 50 matrices, {dt:.2f} s")


def test_c07_crossing_monotone(sweep, criterion):
    frames = [sweep["runs"][d][0].report.depth_feature_frame for d in DEPTHS_MM]
    rho = float(spearmanr(DEPTHS_MM, frames).statistic)
    increasing = bool(np.all(np.diff(frames) > 0))
    ok = increasing and abs(rho - 1.0) < 1e-12 and sweep["seconds"] < 300  # spearmanr rounds to 1 - ulp
    shown = ", ".join(f"{f:.2f}" for f in frames)
    assert criterion(7, ok, f"feature frames [{shown}], rho {rho:.3f}, sweep {sweep['seconds']:.0f} s")


def test_c08_regimes(sweep, criterion):
    rows = []
    ok = True
    for d in DEPTHS_MM:
        rep = sweep["runs"][d][0].report
        first = rep.crossings[0]
        if d == 0.2:
            good = not rep.first_is_at_start and rep.regime == WITHIN
        elif d >= 0.6:
            chosen = next(c for c in rep.crossings if c.frame == rep.depth_feature_frame)
            good = rep.first_is_at_start and rep.regime == BEYOND and chosen.stage == COOLING
        else:
            good = True  # 0.4 mm is not constrained
        ok &= good
        rows.append(f"{d:.1f}mm first={first.frame:.1f} {rep.regime}")
    assert criterion(8, ok, "; ".join(rows))


def test_c09_max_snr_monotone(sweep, criterion):
    detail, ok = [], True
    for det in ("kpca", "lrs"):
        vals = [sweep["runs"][d][0].manifest[f"{det}_max_snr"] for d in DEPTHS_MM]
        dec = bool(np.all(np.diff(vals) < 0))
        ok &= dec
        detail.append(f"{det} [{', '.join(f'{v:.3f}' for v in vals)}] decreasing={dec}")
    assert criterion(9, ok, "; ".join(detail))


def test_c10_conservation(criterion):
    t0 = time.perf_counter()
    sc = reference_scene(0.4e-3, netd=0.0)
    on = expand_code(BitSequence((1,)), 1.0, FPS, "unipolar")
    cube, energy = simulate_cube(sc.plate, sc.notches, sc.source, on, FPS, 4.0, return_energy=True)
    steps = int(cube.meta["substeps_per_frame"])
    after = energy[51:]
    drift = float(np.abs(after - after[0]).max() / after[0] / ((after.size - 1) * steps) * 1000)
    off = expand_code(BitSequence((-1,)), 1.0, FPS, "unipolar")
    still = simulate_cube(sc.plate, sc.notches, sc.source, off, FPS, 2.0)
    constant = bool(np.all(still.frames == sc.plate.ambient_temp))
    dt = time.perf_counter() - t0
    ok = drift < 1e-6 and constant and dt < 30
    assert criterion(10, ok, f"energy drift {drift:.1e} per 1000 steps, zero drive constant {constant}, {dt:.1f} s")


def test_c11_determinism(sweep, criterion, tmp_path):
    run_depth(DEPTHS_MM[0], tmp_path)
    first = sweep["root"] / f"{DEPTHS_MM[0]:.1f}"
    names = sorted(p.name for p in first.iterdir())
    differ = [n for n in names if (first / n).read_bytes() != (tmp_path / n).read_bytes()]
    ok = not differ and sorted(p.name for p in tmp_path.iterdir()) == names
    assert criterion(11, ok, f"{len(names)} output files compared, differing: {differ or 'none'}")


def test_c12_budget(sweep, criterion):
    worst = max(t for _, t in sweep["runs"].values())
    ok = worst < 600
    assert criterion(12, ok, f"slowest full pipeline run {worst:.1f} s (budget 600 s)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
