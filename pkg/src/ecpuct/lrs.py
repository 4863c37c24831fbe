"""Low-rank plus sparse decomposition of the impulse-response matrix.

``Y = L + S + noise`` with a low-rank background ``L`` and a sparse defect
term ``S``.  Two sparse models are available:

``"elementwise"`` (default)
    Block coordinate descent on
    ``||Y - L - S||^2 + p^2 rank(L) + zeta^2 ||S||_0``.
    Each block step is an exact minimiser: hard singular-value thresholding
    at ``p`` for ``L`` and entrywise hard thresholding at ``zeta`` for ``S``.
    The recovered ``S`` is factored afterwards by ridge alternating least
    squares to produce the per-component maps.

``"factor"``
    Block coordinate descent on
    ``||Y - L - M N^T||^2 + 2 p ||L||_* + phi_m/2 ||M||^2 + phi_n/2 ||N||^2``
    with ``L`` from soft singular-value thresholding and ``S = M N^T`` from
    ridge alternating least squares.

Both objectives are non-increasing by construction; the history is kept in
the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import svds

from .datacube import PixelMatrix

SPARSE_MODELS = ("elementwise", "factor")
MAP_MODES = ("sparse_energy", "projection")


@dataclass(frozen=True)
class LrsConfig:
    p: float | None = None            # None -> 0.1 * top singular value of Y
    phi_m: float = 0.01
    phi_n: float = 0.01
    sparse_rank: int = 2
    max_iter: int = 100
    tol: float = 1e-6
    sparse_model: str = "elementwise"
    zeta: float | None = None         # None -> zeta_scale * robust std of the first residual
    zeta_scale: float = 5.0

    def __post_init__(self):
        for name in ("phi_m", "phi_n", "tol", "zeta_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.p is not None and self.p < 0:
            raise ValueError("p must be >= 0")
        if self.zeta is not None and self.zeta < 0:
            raise ValueError("zeta must be >= 0")
        if self.sparse_rank < 1:
            raise ValueError("sparse_rank must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.sparse_model not in SPARSE_MODELS:
            raise ValueError(f"sparse_model must be one of {SPARSE_MODELS}")


@dataclass(frozen=True, eq=False)
class LrsResult:
    L: np.ndarray
    S: np.ndarray
    M_f: np.ndarray
    N_f: np.ndarray
    objective_history: np.ndarray
    residual_history: np.ndarray
    iterations: int
    termination: str
    p: float
    zeta: float | None
    sparse_model: str
    nx: int
    ny: int
    Y: np.ndarray

    @property
    def residual_norm(self) -> float:
        return float(self.residual_history[-1])

    @property
    def names(self) -> list[str]:
        return [f"LRS{k + 1}" for k in range(self.M_f.shape[1])]


# --------------------------------------------------------------------------
# singular value thresholding

_PARTIAL_MIN_SIZE = 400_000


def _top_svd(A: np.ndarray, k: int):
    v0 = np.ones(min(A.shape)) / np.sqrt(min(A.shape))  # fixed start keeps ARPACK deterministic
    u, s, vt = svds(A, k=k, v0=v0, solver="arpack")
    order = np.argsort(s)[::-1]
    return u[:, order], s[order], vt[order]


def _svd_above(A: np.ndarray, tau: float, k_hint: int = 8):
    """Singular triplets with ``sigma > tau``; partial SVD for large matrices.

    Values within a few ulps of ``tau`` count as not above it, so that
    ``tau = ||A||_2`` from another SVD routine still gives an empty result.
    """
    tau = tau * (1.0 + 16 * np.finfo(float).eps)
    n = min(A.shape)
    if A.size >= _PARTIAL_MIN_SIZE:
        k = max(2, k_hint)
        while k < n // 2:
            u, s, vt = _top_svd(A, k)
            if s[-1] <= tau:
                keep = s > tau
                return u[:, keep], s[keep], vt[keep]
            k *= 2
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    keep = s > tau
    return u[:, keep], s[keep], vt[keep]


def svt(A, tau: float) -> np.ndarray:
    """Soft singular value thresholding ``U max(S - tau, 0) V^T``."""
    A = np.asarray(A, dtype=np.float64)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return A.copy()
    u, s, vt = _svd_above(A, tau)
    return (u * (s - tau)) @ vt


def hard_svt(A, tau: float, k_hint: int = 8) -> tuple[np.ndarray, int]:
    """Keep the singular components with ``sigma > tau`` unchanged; also returns the rank."""
    A = np.asarray(A, dtype=np.float64)
    u, s, vt = _svd_above(A, tau, k_hint)
    return (u * s) @ vt, len(s)


def nuclear_norm(A) -> float:
    return float(np.linalg.svd(A, compute_uv=False).sum())


# --------------------------------------------------------------------------
# ridge factorisation

def _factor_objective(R, M, N, phi_m, phi_n) -> float:
    return float(np.sum((R - M @ N.T) ** 2) + 0.5 * phi_m * np.sum(M**2) + 0.5 * phi_n * np.sum(N**2))


def _ridge_solve(B: np.ndarray, G: np.ndarray, lam: float) -> np.ndarray:
    """``B (G + lam I)^-1`` with a pseudo-inverse for singular Gram matrices."""
    A = G + lam * np.eye(len(G))
    return B @ np.linalg.pinv(A, hermitian=True)


def sparse_factor_step(R, r: int, phi_m: float = 0.0, phi_n: float = 0.0,
                       max_inner: int = 50, rel_tol: float = 1e-8):
    """Ridge alternating least squares for ``R ~ M N^T`` with rank ``r``.

    Minimises ``||R - M N^T||^2 + phi_m/2 ||M||^2 + phi_n/2 ||N||^2``
    starting from the balanced truncated SVD of ``R``.
    """
    R = np.asarray(R, dtype=np.float64)
    if not 1 <= r <= min(R.shape):
        raise ValueError(f"rank {r} outside [1, {min(R.shape)}]")
    if not np.any(R):
        return np.zeros((R.shape[0], r)), np.zeros((R.shape[1], r))
    if R.size >= _PARTIAL_MIN_SIZE and r < min(R.shape) - 1:
        u, s, vt = _top_svd(R, r)
    else:
        u, s, vt = np.linalg.svd(R, full_matrices=False)
        u, s, vt = u[:, :r], s[:r], vt[:r]
    root = np.sqrt(s)
    M, N = u * root, vt.T * root
    prev = _factor_objective(R, M, N, phi_m, phi_n)
    lm, ln = phi_m / 2, phi_n / 2
    for _ in range(max_inner):
        M = _ridge_solve(R @ N, N.T @ N, lm)
        N = _ridge_solve(R.T @ M, M.T @ M, ln)
        obj = _factor_objective(R, M, N, phi_m, phi_n)
        if abs(prev - obj) <= rel_tol * max(prev, 1e-300):
            prev = obj
            break
        prev = obj
    return M, N


# --------------------------------------------------------------------------
# decomposition

def _robust_std(x: np.ndarray) -> float:
    med = np.median(x)
    return 1.4826 * float(np.median(np.abs(x - med)))


def _hard_threshold(A: np.ndarray, zeta: float) -> np.ndarray:
    return np.where(np.abs(A) > zeta, A, 0.0)


def lrs_decompose(Y: PixelMatrix, cfg: LrsConfig = LrsConfig()) -> LrsResult:
    """Split a ``Q x M`` matrix into low-rank and sparse parts."""
    data = np.asarray(Y.data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("input matrix contains non-finite values")
    r = cfg.sparse_rank
    if r > min(data.shape):
        raise ValueError(f"sparse_rank {r} exceeds min(Q, M) = {min(data.shape)}")
    if data.size >= _PARTIAL_MIN_SIZE:
        top = float(_top_svd(data, 1)[1][0])
    else:
        top = float(np.linalg.norm(data, 2))
    p = 0.1 * top if cfg.p is None else cfg.p
    Q, M = data.shape

    if top == 0.0:
        z = np.zeros_like(data)
        return LrsResult(z, z.copy(), np.zeros((Q, r)), np.zeros((M, r)), np.zeros(1), np.zeros(1),
                         1, "zero_input", p, cfg.zeta, cfg.sparse_model, Y.nx, Y.ny, data)

    objectives, residuals = [], []
    S = np.zeros_like(data)
    Mf, Nf = np.zeros((Q, r)), np.zeros((M, r))
    zeta = cfg.zeta
    k_hint = 4
    termination = "max_iter"
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if cfg.sparse_model == "elementwise":
            L, rank = hard_svt(data - S, p, k_hint)
            k_hint = rank + 2
            R = data - L
            if zeta is None:
                zeta = cfg.zeta_scale * _robust_std(R)
            S = _hard_threshold(R, zeta)
            resid = data - L - S
            obj = float(np.sum(resid**2) + p**2 * rank + zeta**2 * np.count_nonzero(S))
        else:
            L = svt(data - S, p)
            R = data - L
            M_new, N_new = sparse_factor_step(R, r, cfg.phi_m, cfg.phi_n)
            # keep the previous factors if the inner solver did not improve on them
            if it == 1 or _factor_objective(R, M_new, N_new, cfg.phi_m, cfg.phi_n) <= \
                    _factor_objective(R, Mf, Nf, cfg.phi_m, cfg.phi_n):
                Mf, Nf = M_new, N_new
            S = Mf @ Nf.T
            resid = data - L - S
            obj = float(np.sum(resid**2) + 2 * p * nuclear_norm(L)
                        + 0.5 * cfg.phi_m * np.sum(Mf**2) + 0.5 * cfg.phi_n * np.sum(Nf**2))
        objectives.append(obj)
        residuals.append(float(np.linalg.norm(resid)))
        if len(objectives) > 1 and abs(objectives[-2] - obj) <= cfg.tol * max(abs(objectives[-2]), 1e-300):
            termination = "tol"
            break

    if cfg.sparse_model == "elementwise":
        if np.any(S):
            Mf, Nf = sparse_factor_step(S, r, cfg.phi_m, cfg.phi_n)
    return LrsResult(L, S, Mf, Nf, np.array(objectives), np.array(residuals), it, termination,
                     p, zeta, cfg.sparse_model, Y.nx, Y.ny, data)


# --------------------------------------------------------------------------
# enhancement maps

def _map(S: np.ndarray, Y: np.ndarray, mode: str) -> np.ndarray:
    if mode == "sparse_energy":
        return np.sum(S**2, axis=0)
    if mode == "projection":
        return np.sum(S * Y, axis=0)
    raise ValueError(f"map mode must be one of {MAP_MODES}, got {mode!r}")


def enhance_map(result: LrsResult, mode: str = "sparse_energy") -> np.ndarray:
    """Per-pixel enhancement image of the sparse term, ``Nx x Ny``."""
    return _map(result.S, result.Y, mode).reshape(result.nx, result.ny)


def component_maps(result: LrsResult, mode: str = "sparse_energy") -> np.ndarray:
    """Maps of the rank-1 terms ``M_f[:, k] N_f[:, k]^T``, shape ``r x Nx x Ny``."""
    out = []
    for k in range(result.M_f.shape[1]):
        Sk = np.outer(result.M_f[:, k], result.N_f[:, k])
        out.append(_map(Sk, result.Y, mode).reshape(result.nx, result.ny))
    return np.array(out)
