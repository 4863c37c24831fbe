"""Kernel-PCA enhancement of impulse-response matrices.

The kernel is built between time frames (rows of the ``Q x M`` pixel
matrix), so ``K`` is ``Q x Q`` and each eigenvector has one weight per frame.
Projecting the pixel matrix onto an eigenvector collapses the time axis into
one enhancement image.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .datacube import PixelMatrix


class KpcaRankWarning(UserWarning):
    """Fewer numerically valid components than requested."""


@dataclass(frozen=True)
class KernelConfig:
    sigma: float | str = "median"
    n_components: int = 4
    kernel: str = "gaussian"

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.kernel not in ("gaussian", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not isinstance(self.sigma, str) and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if isinstance(self.sigma, str) and self.sigma != "median":
            raise ValueError(f"sigma must be a number or 'median', got {self.sigma!r}")


@dataclass(frozen=True, eq=False)
class KpcaResult:
    eigenvalues: np.ndarray
    alphas: np.ndarray            # Q x k, one column per component
    component_images: np.ndarray  # k x Nx x Ny
    sigma: float | None

    @property
    def names(self) -> list[str]:
        return [f"K-PCA{i + 1}" for i in range(len(self.eigenvalues))]


def squared_distances(X: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def median_heuristic(X: np.ndarray, d2: np.ndarray | None = None) -> float:
    """Median of the pairwise (i < j) Euclidean distances between rows."""
    if d2 is None:
        d2 = squared_distances(X)
    iu = np.triu_indices(d2.shape[0], k=1)
    sigma = float(np.median(np.sqrt(d2[iu])))
    if sigma <= 0.0:
        raise ValueError("median heuristic gives sigma = 0: samples are (mostly) identical")
    return sigma


def gaussian_kernel_matrix(X, sigma: float | str = "median") -> np.ndarray:
    """``K[i, j] = exp(-|x_i - x_j|^2 / (2 sigma^2))`` over the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D sample array with at least 2 rows")
    d2 = squared_distances(X)
    if isinstance(sigma, str):
        sigma = median_heuristic(X, d2)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    K = np.exp(-d2 / (2.0 * sigma * sigma))
    return 0.5 * (K + K.T)


def linear_kernel_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X @ X.T


def center_kernel(K) -> np.ndarray:
    """Double-centre ``K`` so every row and column sums to zero."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel must be square, got shape {K.shape}")
    row = K.mean(axis=0, keepdims=True)
    col = K.mean(axis=1, keepdims=True)
    Kc = K - row - col + K.mean()
    return 0.5 * (Kc + Kc.T)


def kpca_components(Kc, n_components: int = 4, rel_tol: float = 1e-10):
    """Leading eigenpairs of a centred kernel.

    Each ``alpha_i`` is scaled so that ``lambda_i * |alpha_i|^2 = 1`` and
    flipped so its largest-magnitude entry is positive. Eigenvalues below
    ``rel_tol * lambda_1`` are dropped with a :class:`KpcaRankWarning`.

    Returns ``(eigenvalues, alphas)`` with ``alphas`` of shape ``Q x k``.
    """
    Kc = np.asarray(Kc, dtype=np.float64)
    n = Kc.shape[0]
    k = min(n_components, n)
    vals, vecs = eigh(Kc, subset_by_index=[n - k, n - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if vals.size == 0 or vals[0] <= 0:
        warnings.warn("centred kernel has no positive eigenvalue", KpcaRankWarning, stacklevel=2)
        return np.empty(0), np.empty((n, 0))
    keep = vals > rel_tol * vals[0]
    if not keep.all() or k < n_components:
        warnings.warn(f"only {int(keep.sum())} of {n_components} components are numerically valid",
                      KpcaRankWarning, stacklevel=2)
    vals, vecs = vals[keep], vecs[:, keep]
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    alphas = vecs * signs / np.sqrt(vals)
    return vals, alphas


def project_components(alphas, Y: PixelMatrix) -> np.ndarray:
    """Collapse the frame axis of ``Y`` with each ``alpha``: one ``Nx x Ny`` image per component."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    if alphas.shape[0] != Y.data.shape[0]:
        raise ValueError(f"alpha has {alphas.shape[0]} entries but Y has {Y.data.shape[0]} frames")
    images = alphas.T @ Y.data
    return images.reshape(-1, Y.nx, Y.ny)


def run_kpca(Y: PixelMatrix, cfg: KernelConfig = KernelConfig()) -> KpcaResult:
    X = Y.data
    if cfg.kernel == "linear":
        K, sigma = linear_kernel_matrix(X), None
    else:
        sigma = median_heuristic(X) if cfg.sigma == "median" else float(cfg.sigma)
        K = gaussian_kernel_matrix(X, sigma)
    vals, alphas = kpca_components(center_kernel(K), cfg.n_components)
    return KpcaResult(vals, alphas, project_components(alphas, Y), sigma)
