"""Thermogram sequences, their pixel-matrix view, ROIs and the TCUBE file format.

Pixel ordering is row-major with ``y`` fastest: pixel ``(x, y)`` of an
``Nx x Ny`` frame maps to matrix column ``x * Ny + y``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("raw", "detrended", "impulse_response", "components")

TCUBE_MAGIC = b"TCUB"
TCUBE_VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")


@dataclass(frozen=True, eq=False)
class ThermogramCube:
    """``Q x Nx x Ny`` record of pixel amplitudes sampled at ``fps``."""

    frames: np.ndarray
    fps: float
    kind: str = "raw"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 3 or min(frames.shape) < 1:
            raise ValueError(f"frames must be a non-empty Q x Nx x Ny array, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite values")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.frames.shape

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def with_frames(self, frames, kind=None, fps=None, **meta) -> "ThermogramCube":
        merged = {**self.meta, **meta}
        return ThermogramCube(frames, self.fps if fps is None else fps, kind or self.kind, merged)


@dataclass(frozen=True, eq=False)
class PixelMatrix:
    """``Q x M`` view of a cube; column ``j`` is the time series of one pixel."""

    data: np.ndarray
    nx: int
    ny: int

    def __post_init__(self):
        if self.data.shape[1] != self.nx * self.ny:
            raise ValueError(f"matrix has {self.data.shape[1]} columns, expected {self.nx * self.ny}")

    @property
    def shape(self):
        return self.data.shape

    def column_of(self, x: int, y: int) -> int:
        return x * self.ny + y

    def pixel_of(self, j: int) -> tuple[int, int]:
        return divmod(j, self.ny)

    def to_frames(self) -> np.ndarray:
        return self.data.reshape(-1, self.nx, self.ny)

    def image(self, row: np.ndarray) -> np.ndarray:
        """Reshape a length-M vector into an ``Nx x Ny`` image."""
        return np.asarray(row).reshape(self.nx, self.ny)


def reshape_to_matrix(cube: ThermogramCube) -> PixelMatrix:
    q, nx, ny = cube.shape
    return PixelMatrix(cube.frames.reshape(q, nx * ny), nx, ny)


def matrix_to_cube(matrix: PixelMatrix, fps: float, kind: str = "raw") -> ThermogramCube:
    return ThermogramCube(matrix.to_frames(), fps, kind)


@dataclass(frozen=True)
class Roi:
    """Set of ``(x, y)`` pixels. Use :meth:`rect` for rectangles."""

    pixels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.pixels) == 0:
            raise ValueError("ROI must contain at least one pixel")
        object.__setattr__(self, "pixels", tuple((int(x), int(y)) for x, y in self.pixels))

    @classmethod
    def rect(cls, x0: int, y0: int, w: int, h: int) -> "Roi":
        """``w`` pixels along x by ``h`` pixels along y, anchored at ``(x0, y0)``."""
        if w < 1 or h < 1:
            raise ValueError(f"ROI size must be positive, got {w}x{h}")
        return cls(tuple((x, y) for x in range(x0, x0 + w) for y in range(y0, y0 + h)))

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.pixels])

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.pixels])

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """``(x0, y0, w, h)`` of the bounding rectangle."""
        xs, ys = self.xs, self.ys
        return int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)

    def translate(self, dx: int = 0, dy: int = 0) -> "Roi":
        return Roi(tuple((x + dx, y + dy) for x, y in self.pixels))

    def check_bounds(self, frame_shape) -> None:
        nx, ny = frame_shape
        xs, ys = self.xs, self.ys
        if xs.min() < 0 or ys.min() < 0 or xs.max() >= nx or ys.max() >= ny:
            raise ValueError(f"ROI with bounding box {self.bbox} lies outside the {nx}x{ny} frame")

    def to_spec(self) -> str:
        x0, y0, w, h = self.bbox
        if w * h == len(self.pixels):
            return f"{x0},{y0},{w},{h}"
        return ";".join(f"{x}:{y}" for x, y in self.pixels)


def sound_roi_for(defect: Roi, offset_px: int = 6, frame_shape=None) -> Roi:
    """Reference ROI of the same shape placed ``offset_px`` beyond the defect's right edge.

    The shift is measured from the last defect column, so for the usual
    single-column ROI the new column sits ``offset_px`` pixels further along x.
    """
    if offset_px < 0:
        raise ValueError("offset_px must be non-negative")
    _, _, w, _ = defect.bbox
    shifted = defect.translate(dx=w - 1 + offset_px)
    if frame_shape is not None:
        nx, _ = frame_shape
        if shifted.xs.max() >= nx:
            raise ValueError(
                f"reference ROI would end at x={shifted.xs.max()} beyond the frame width {nx}; "
                "choose a reference on the opposite (left) side of the defect")
    return shifted


def roi_mean_series(cube: ThermogramCube, roi: Roi) -> np.ndarray:
    roi.check_bounds(cube.frame_shape)
    return cube.frames[:, roi.xs, roi.ys].mean(axis=1)


def parse_roi(text: str) -> Roi:
    """Parse ``"x0,y0,w,h"`` or a ``"x:y;x:y"`` pixel list."""
    text = text.strip()
    if ":" in text:
        pixels = []
        for item in text.split(";"):
            x, y = item.split(":")
            pixels.append((int(x), int(y)))
        return Roi(tuple(pixels))
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"ROI must be 'x0,y0,w,h' or 'x:y;x:y', got {text!r}")
    return Roi.rect(*parts)


# --- TCUBE ---------------------------------------------------------------

def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_tcube(path, cube: ThermogramCube, **meta) -> None:
    """Write ``cube`` as TCUBE v1 plus a ``key=value`` sidecar holding the kind."""
    path = Path(path)
    q, nx, ny = cube.shape
    body = np.ascontiguousarray(cube.frames, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TCUBE_MAGIC, TCUBE_VERSION, q, nx, ny, cube.fps))
        fh.write(body.tobytes(order="C"))
    write_meta(meta_path(path), {"kind": cube.kind, **cube.meta, **meta})


def read_tcube(path, kind=None) -> ThermogramCube:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a TCUBE header")
    magic, version, q, nx, ny, fps = _HEADER.unpack_from(raw)
    if magic != TCUBE_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {TCUBE_MAGIC!r}")
    if version != TCUBE_VERSION:
        raise ValueError(f"{path}: unsupported TCUBE version {version}")
    expected = _HEADER.size + 4 * q * nx * ny
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {q}x{nx}x{ny}, found {len(raw)}")
    frames = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(q, nx, ny)
    meta = read_meta(meta_path(path)) if meta_path(path).exists() else {}
    kind = kind or meta.pop("kind", "raw")
    meta.pop("kind", None)
    return ThermogramCube(frames.astype(np.float64), float(fps), kind, meta)


def write_meta(path, items: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key}={value}\n")


def read_meta(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def read_cube_csv(path, nx: int, ny: int, fps: float, kind: str = "raw") -> ThermogramCube:
    """Load a small cube stored one frame per row with ``nx * ny`` columns."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != nx * ny:
        raise ValueError(f"{path}: rows have {data.shape[1]} values, expected {nx * ny}")
    return ThermogramCube(data.reshape(-1, nx, ny), fps, kind)


def write_cube_csv(path, cube: ThermogramCube) -> None:
    q = cube.n_frames
    np.savetxt(path, cube.frames.reshape(q, -1), delimiter=",", fmt="%.9g", newline="\n")
