"""Step-heating removal and pixel-wise pulse compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy.signal import fftconvolve

from .datacube import ThermogramCube
from .excitation import MatchedFilter


@dataclass(frozen=True)
class DetrendConfig:
    """Least-squares polynomial fitted over the full record and subtracted."""

    degree: int = 3
    model: str = "polynomial"
    fit_region: str = "full_record"

    def __post_init__(self):
        if self.model != "polynomial":
            raise ValueError(f"unsupported detrend model {self.model!r}")
        if self.fit_region != "full_record":
            raise ValueError(f"unsupported fit region {self.fit_region!r}")
        if not 1 <= self.degree <= 10:
            raise ValueError(f"detrend degree must be in 1..10, got {self.degree}")


@dataclass(frozen=True)
class CompressionWindow:
    """Impulse-response window ``[0, t_h]`` with lag 0 at excitation start."""

    t_h: float = 30.0
    lag_origin: str = "excitation_start"

    def n_lags(self, fps: float) -> int:
        return int(round(self.t_h * fps)) + 1


def _basis(n: int, degree: int) -> np.ndarray:
    """Orthonormal basis of polynomials up to ``degree`` sampled on ``n`` points."""
    t = np.linspace(-1.0, 1.0, n)
    q, _ = np.linalg.qr(legendre.legvander(t, degree))
    return q


def remove_step_heating(series, cfg: DetrendConfig = DetrendConfig()) -> np.ndarray:
    """Subtract the least-squares polynomial trend along axis 0.

    Accepts a single series or a ``Q x n`` stack of series.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if n < cfg.degree + 2:
        raise ValueError(f"series of length {n} too short for a degree-{cfg.degree} fit "
                         f"(need at least {cfg.degree + 2} samples)")
    q = _basis(n, cfg.degree)
    flat = y.reshape(n, -1)
    resid = flat - q @ (q.T @ flat)
    return resid.reshape(y.shape)


def _compress(y: np.ndarray, psi: MatchedFilter, n_lags: int) -> np.ndarray:
    kernel = psi.samples
    energy = float(kernel @ kernel)
    if energy == 0.0:
        raise ValueError("matched filter has zero energy")
    flat = y.reshape(y.shape[0], -1)
    full = fftconvolve(flat, kernel[:, None], mode="full", axes=0)
    start = kernel.size - 1
    out = full[start:start + n_lags] / energy
    return out.reshape((n_lags,) + y.shape[1:])


def max_window(n_samples: int, fps: float) -> float:
    """Longest ``t_h`` (seconds) that fits a record of ``n_samples`` frames."""
    return (n_samples - 1) / fps


def pulse_compress(series, psi: MatchedFilter, win: CompressionWindow = CompressionWindow(),
                   fps: float | None = None) -> np.ndarray:
    """Correlate a detrended series with the matched filter.

    The output is normalised by the reference energy (a perfect code
    autocorrelation peaks at 1) and cropped to ``round(t_h * fps) + 1`` lags.
    Works along axis 0, so a ``Q x n`` stack compresses every column.
    """
    y = np.asarray(series, dtype=np.float64)
    fps = psi.sample_rate if fps is None else fps
    if y.shape[0] < psi.samples.size:
        raise ValueError(f"series has {y.shape[0]} samples, shorter than the "
                         f"{psi.samples.size}-sample matched filter")
    n_lags = win.n_lags(fps)
    if n_lags > y.shape[0]:
        raise ValueError(f"t_h = {win.t_h:g} s needs {n_lags} lags but only {y.shape[0]} are "
                         f"available; max t_h = {max_window(y.shape[0], fps):g} s")
    return _compress(y, psi, n_lags)


def compress_cube(cube: ThermogramCube, psi: MatchedFilter, cfg: DetrendConfig = DetrendConfig(),
                  win: CompressionWindow = CompressionWindow()) -> ThermogramCube:
    """Detrend and pulse-compress every pixel of a raw cube."""
    if cube.kind != "raw":
        raise ValueError(f"compress_cube needs a raw cube, got kind={cube.kind!r}")
    detrended = remove_step_heating(cube.frames, cfg)
    h = pulse_compress(detrended, psi, win, cube.fps)
    bad = np.argwhere(~np.isfinite(h))
    if bad.size:
        _, x, y = bad[0]
        raise ValueError(f"non-finite impulse response at pixel (x={x}, y={y})")
    return ThermogramCube(h, cube.fps, "impulse_response",
                          {**cube.meta, "t_h": win.t_h, "detrend_degree": cfg.degree,
                           "code_order": psi.code_order})
