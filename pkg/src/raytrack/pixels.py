"""Per-frame preprocessing: blur, subsample, edge image, frame difference.

All rasters are numpy arrays indexed ``[y, x]`` and all integer rounding is
round-half-up on nonnegative values, done in integer arithmetic so results are
bit-exact across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from raytrack.config import PipelineConfig

EDGE_THRESHOLD = 128
POISSON_SEED = 5
POISSON_DARTS = 4000


class DimensionError(ValueError):
    pass


class ImageTooSmallError(ValueError):
    pass


class ZeroImageError(ValueError):
    pass


def _frozen(a: np.ndarray, dtype=np.uint8) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.flags.writeable = False
    return a


def _div_round(num: np.ndarray, den: int) -> np.ndarray:
    """Round-half-up of ``num / den`` for nonnegative integer arrays."""
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True, eq=False)
class Frame:
    """RGB raster, shape ``(height, width, 3)``, plus a timestamp in ms."""

    pixels: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise DimensionError(f"expected (h, w, 3) pixels, got shape {p.shape}")
        if p.shape[0] < 3 or p.shape[1] < 3:
            raise ImageTooSmallError(f"frame must be at least 3x3, got {p.shape[1]}x{p.shape[0]}")
        if p.dtype != np.uint8:
            if p.size and (p.min() < 0 or p.max() > 255):
                raise ValueError("channel values must be in 0..255")
        object.__setattr__(self, "pixels", _frozen(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.timestamp == other.timestamp and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GrayImage:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class EdgeImage:
    """Gradient magnitudes; a pixel is an edge iff its magnitude is above ``threshold``."""

    magnitudes: np.ndarray
    threshold: int = EDGE_THRESHOLD
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mag = _frozen(self.magnitudes)
        object.__setattr__(self, "magnitudes", mag)
        object.__setattr__(self, "mask", _frozen(mag > self.threshold, dtype=bool))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "EdgeImage":
        return cls(np.where(mask, 255, 0).astype(np.uint8))

    @property
    def width(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def height(self) -> int:
        return self.magnitudes.shape[0]

    def is_edge(self, x: int, y: int) -> bool:
        return bool(self.mask[y, x])

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True, eq=False)
class DiffImage:
    values: np.ndarray
    compensation: int = 0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.size and (v.min() < 0 or v.max() > 255):
            raise ValueError("difference values must be in 0..255")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@lru_cache(maxsize=None)
def poisson_offsets(radius: int) -> tuple[tuple[int, int], ...]:
    """Integer Poisson-disk sample offsets inside a disk of ``radius``.

    Fixed-seed dart throwing with minimum spacing ``radius / 2``; the center
    offset is always the first sample.
    """
    if radius <= 0:
        return ((0, 0),)
    rng = np.random.default_rng(POISSON_SEED)
    min_d2 = (radius / 2.0) ** 2
    samples = [(0, 0)]
    for _ in range(POISSON_DARTS):
        dx, dy = np.rint(rng.uniform(-radius, radius, size=2)).astype(int)
        if dx * dx + dy * dy > radius * radius:
            continue
        if all((dx - sx) ** 2 + (dy - sy) ** 2 >= min_d2 for sx, sy in samples):
            samples.append((int(dx), int(dy)))
    return tuple(samples)


def _shifted(padded: np.ndarray, pad: int, dx: int, dy: int, h: int, w: int) -> np.ndarray:
    return padded[pad + dy:pad + dy + h, pad + dx:pad + dx + w]


def poisson_blur(frame: Frame, radius: int = 5) -> Frame:
    """Mean over the Poisson-disk offsets, clamping samples at the borders."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return frame
    offsets = poisson_offsets(radius)
    h, w = frame.height, frame.width
    padded = np.pad(frame.pixels, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    acc = np.zeros((h, w, 3), dtype=np.int32)
    for dx, dy in offsets:
        acc += _shifted(padded, radius, dx, dy, h, w)
    return Frame(_div_round(acc, len(offsets)).astype(np.uint8), frame.timestamp)


def subsample(frame: Frame, width: int = 160, height: int = 120) -> Frame:
    """Exact box-filter reduction by an integer factor on each axis."""
    w, h = frame.width, frame.height
    if width > w or height > h or w % width or h % height:
        raise DimensionError(
            f"cannot subsample {w}x{h} to {width}x{height}: sizes must be integer multiples")
    fx, fy = w // width, h // height
    if fx == 1 and fy == 1:
        return frame
    blocks = frame.pixels.reshape(height, fy, width, fx, 3).astype(np.int32)
    total = blocks.sum(axis=(1, 3))
    return Frame(_div_round(total, fx * fy).astype(np.uint8), frame.timestamp)


def to_gray(frame: Frame) -> GrayImage:
    p = frame.pixels.astype(np.int32)
    luma = 299 * p[..., 0] + 587 * p[..., 1] + 114 * p[..., 2]
    return GrayImage(((luma + 500) // 1000).astype(np.uint8))


def sobel_edges(gray: GrayImage, threshold: int = EDGE_THRESHOLD) -> EdgeImage:
    """3x3 Sobel gradient magnitude, replicate padding, clamped to 255."""
    h, w = gray.values.shape
    if w < 3 or h < 3:
        raise ImageTooSmallError(f"sobel needs at least 3x3, got {w}x{h}")
    p = np.pad(gray.values.astype(np.int32), 1, mode="edge")
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (tr + 2 * mr + br) - (tl + 2 * ml + bl)
    gy = (bl + 2 * bc + br) - (tl + 2 * tc + tr)
    mag = np.floor(np.sqrt((gx * gx + gy * gy).astype(np.float64)) + 0.5)
    return EdgeImage(np.minimum(mag, 255).astype(np.uint8), threshold)


def brightness_compensation(raw: np.ndarray, distinct: int = 10, cap: int = 64) -> int:
    """Largest of the ``distinct`` smallest distinct values, capped."""
    values = np.unique(raw)
    k = min(distinct, len(values))
    return int(min(values[k - 1], cap))


def abs_diff(prev: Frame, cur: Frame, distinct: int = 10, cap: int = 64) -> DiffImage:
    if prev.pixels.shape != cur.pixels.shape:
        raise DimensionError(
            f"frame size mismatch: {prev.width}x{prev.height} vs {cur.width}x{cur.height}")
    d = np.abs(prev.pixels.astype(np.int16) - cur.pixels.astype(np.int16)).sum(axis=2, dtype=np.int32)
    raw = _div_round(d, 3)
    c = brightness_compensation(raw, distinct, cap)
    return DiffImage(np.maximum(raw - c, 0).astype(np.uint8), c)


def global_movement(diff: DiffImage) -> int:
    return int(diff.values.sum(dtype=np.int64))


def center_of_mass(diff: DiffImage | np.ndarray) -> tuple[int, int]:
    """Magnitude-weighted mean position, rounded; also accepts a bare weight array."""
    v = np.asarray(diff.values if isinstance(diff, DiffImage) else diff).astype(np.int64)
    if v.size and v.min() < 0:
        raise ValueError("weights must be nonnegative")
    total = int(v.sum())
    if total == 0:
        raise ZeroImageError("center of mass of an all-zero difference image")
    ys, xs = np.indices(v.shape)
    sx, sy = int((v * xs).sum()), int((v * ys).sum())
    return (2 * sx + total) // (2 * total), (2 * sy + total) // (2 * total)


@dataclass(frozen=True, eq=False)
class Preprocessed:
    """Everything the tracker needs from one captured frame."""

    small: Frame
    edges: EdgeImage
    diff: DiffImage | None
    movement: int

    @property
    def compensation(self) -> int:
        return self.diff.compensation if self.diff is not None else 0


def preprocess(frame: Frame, prev_small: Frame | None = None,
               cfg: PipelineConfig = PipelineConfig()) -> Preprocessed:
    """Blur, subsample, edge-detect and (when possible) diff against ``prev_small``."""
    blurred = poisson_blur(frame, cfg.blur_radius)
    small = subsample(blurred, cfg.target_width, cfg.target_height)
    edges = sobel_edges(to_gray(small), cfg.edge_threshold)
    if prev_small is None:
        return Preprocessed(small, edges, None, 0)
    diff = abs_diff(prev_small, small, cfg.distinct_values, cfg.compensation_cap)
    return Preprocessed(small, edges, diff, global_movement(diff))
