"""Projection centroid/area estimation by casting rays through an edge image.

Four estimators of increasing strength share one traversal kernel:

* ``estimate_nray``: one fan of ``n`` rays.
* ``estimate_iter_nray``: repeat the fan, walking the inner point toward
  the hit centroid until it settles.
* ``estimate_iter_nyray``: recast ``n`` rays from every hit, ``y`` levels deep.
* ``estimate_iter_nyray_raster``: additionally mark every ``m x m`` block a
  ray ran through; centroid and area come from the accumulated blocks.

A ray runs through a block when it crosses the block's center cell, the same
center-sampling rule a rasterizer uses for pixels. Counting any touched block
instead would bill every block clipped by the contour at full size.

Rays walk an 8-connected integer line: the major axis advances one pixel per
step and the minor axis is rounded (half away from zero), so a fan is a fixed
table of offsets that can be applied to many origins at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from raytrack.config import EstimatorConfig
from raytrack.pixels import EdgeImage

Point = tuple[int, int]

# N, NE, E, SE, S, SW, W, NW with y growing downward.
COMPASS: tuple[Point, ...] = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))


class OutOfBoundsError(ValueError):
    pass


class EdgeOriginError(ValueError):
    pass


@dataclass(frozen=True)
class RayHit:
    origin: Point
    direction: int
    hit: Point


@dataclass(frozen=True)
class IterationRecord:
    centroid: tuple[float, float]
    inner: Point
    area: float
    blocks: frozenset[Point] | None = None


@dataclass(frozen=True)
class ProjectionEstimate:
    centroid: tuple[float, float]
    area: float
    inner: Point
    iterations: int
    budget_exhausted: bool = False
    history: tuple[IterationRecord, ...] = ()

    @property
    def blocks(self) -> frozenset[Point] | None:
        return self.history[-1].blocks if self.history else None


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _round_away(a: np.ndarray) -> np.ndarray:
    return (np.sign(a) * np.floor(np.abs(a) + 0.5)).astype(np.int64)


def direction(angle: float) -> tuple[float, float]:
    """Unit step for ``angle`` (radians, counter-clockwise from east, y down)."""
    dx, dy = math.cos(angle), -math.sin(angle)
    # kill float residue such as cos(pi/2) = 6e-17
    return round(dx, 12) + 0.0, round(dy, 12) + 0.0


def _ray_offsets(dx: float, dy: float, length: int) -> np.ndarray:
    major = max(abs(dx), abs(dy))
    s = np.arange(length + 1, dtype=np.float64)
    return np.stack([_round_away(s * (dx / major)), _round_away(s * (dy / major))], axis=-1)


@lru_cache(maxsize=64)
def fan_offsets(n: int, length: int) -> np.ndarray:
    """Offsets ``(n, length + 1, 2)`` for the fan at angles ``2*pi*k/n``.

    When ``n`` is a multiple of 4 the first quadrant is computed and the rest
    obtained by exact 90 degree rotation, so fans are rotation symmetric.
    """
    if n % 4 == 0:
        q = n // 4
        base = np.stack([_ray_offsets(*direction(2 * math.pi * k / n), length) for k in range(q)])
        quads = [base]
        for _ in range(3):
            prev = quads[-1]
            quads.append(np.stack([prev[..., 1], -prev[..., 0]], axis=-1))
        offs = np.concatenate(quads)
    else:
        offs = np.stack([_ray_offsets(*direction(2 * math.pi * k / n), length) for k in range(n)])
    offs.flags.writeable = False
    return offs


@dataclass
class _Fan:
    hits: np.ndarray      # (R, n, 2) first edge pixel, or last in-bounds pixel
    free: np.ndarray      # (R, n, 2) last non-edge pixel before the hit
    lengths: np.ndarray   # (R, n)
    path: np.ndarray      # (k, 2) walked non-edge pixels lying in a block's center cell


def _center_cell(m: int) -> tuple[int, int]:
    """In-block offsets ``[lo, hi]`` of the 1x1 (odd m) or 2x2 (even m) center cell."""
    return (m - 1) // 2, m // 2


def _cast(mask: np.ndarray, origins: np.ndarray, offs: np.ndarray, block: int = 0) -> _Fan:
    h, w = mask.shape
    pts = origins[:, None, None, :] + offs[None]
    x, y = pts[..., 0], pts[..., 1]
    inb = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    edge = mask[np.clip(y, 0, h - 1), np.clip(x, 0, w - 1)] & inb
    first = (edge | ~inb).argmax(axis=-1)
    stopped_on_edge = np.take_along_axis(edge, first[..., None], -1)[..., 0]
    hit_idx = np.where(stopped_on_edge, first, first - 1)
    free_idx = np.maximum(first - 1, 0)
    hits = np.take_along_axis(pts, hit_idx[..., None, None], -2)[..., 0, :]
    free = np.take_along_axis(pts, free_idx[..., None, None], -2)[..., 0, :]
    lengths = np.hypot(*(hits - origins[:, None, :]).transpose(2, 0, 1))
    path = None
    if block:
        lo, hi = _center_cell(block)
        bx, by = x % block, y % block
        walked = np.arange(pts.shape[-2]) < first[..., None]
        path = pts[walked & (bx >= lo) & (bx <= hi) & (by >= lo) & (by <= hi)]
    return _Fan(hits, free, lengths, path)


def _check_origin(edges: EdgeImage, p: Point, allow_edge: bool = False) -> None:
    x, y = p
    if not edges.contains(x, y):
        raise OutOfBoundsError(f"point {p} outside {edges.width}x{edges.height} image")
    if not allow_edge and edges.is_edge(x, y):
        raise EdgeOriginError(f"point {p} is an edge pixel")


def _length(edges: EdgeImage) -> int:
    return max(edges.width, edges.height)


def cast_ray(edges: EdgeImage, origin: Point, angle: float) -> Point:
    """First edge pixel along ``angle`` from ``origin``, else the last in-bounds pixel."""
    _check_origin(edges, origin, allow_edge=True)
    offs = _ray_offsets(*direction(angle), _length(edges))[None]
    fan = _cast(edges.mask, np.array([origin]), offs)
    return tuple(int(v) for v in fan.hits[0, 0])


def cast_fan(edges: EdgeImage, origin: Point, n: int) -> list[RayHit]:
    _check_origin(edges, origin, allow_edge=True)
    fan = _cast(edges.mask, np.array([origin]), fan_offsets(n, _length(edges)))
    return [RayHit(tuple(origin), k, (int(hx), int(hy))) for k, (hx, hy) in enumerate(fan.hits[0])]


def line_pixels(p0: Point, p1: Point) -> list[Point]:
    """Integer 8-connected line from ``p0`` to ``p1`` inclusive."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    steps = max(abs(dx), abs(dy))
    if steps == 0:
        return [tuple(p0)]
    out = []
    for k in range(steps + 1):
        ox = (2 * abs(k * dx) + steps) // (2 * steps)
        oy = (2 * abs(k * dy) + steps) // (2 * steps)
        out.append((p0[0] + (ox if dx >= 0 else -ox), p0[1] + (oy if dy >= 0 else -oy)))
    return out


def displace_toward(edges: EdgeImage, start: Point, target: Point) -> Point:
    """Walk from ``start`` toward ``target``, stopping just before the first edge."""
    last = tuple(start)
    for p in line_pixels(start, target)[1:]:
        if edges.mask[p[1], p[0]]:
            return last
        last = p
    return tuple(target)


def _nearest_free_neighbor(edges: EdgeImage, p: Point) -> Point | None:
    best = None
    for dx, dy in COMPASS:
        q = (p[0] + dx, p[1] + dy)
        if not edges.contains(*q) or edges.is_edge(*q):
            continue
        if best is None or (dx * dx + dy * dy) < best[0]:
            best = (dx * dx + dy * dy, q)
    return best[1] if best else None


def recenter(edges: EdgeImage, point: Point, n: int) -> Point:
    """Move ``point`` to the rounded mean of its ray-fan hits."""
    _check_origin(edges, point, allow_edge=True)
    fan = _cast(edges.mask, np.array([point]), fan_offsets(n, _length(edges)))
    mx, my = fan.hits[0].mean(axis=0)
    c = (round_half_up(mx), round_half_up(my))
    if not edges.is_edge(*c):
        return c
    return _nearest_free_neighbor(edges, c) or tuple(point)


def estimate_nray(edges: EdgeImage, inner: Point, cfg: EstimatorConfig = EstimatorConfig()
                  ) -> ProjectionEstimate:
    _check_origin(edges, inner)
    fan = _cast(edges.mask, np.array([inner]), fan_offsets(cfg.n, _length(edges)))
    cx, cy = fan.hits[0].mean(axis=0)
    area = float(fan.lengths.sum())
    moved = displace_toward(edges, inner, (round_half_up(cx), round_half_up(cy)))
    new_inner = recenter(edges, moved, cfg.n)
    centroid = (float(cx), float(cy))
    return ProjectionEstimate(centroid, area, new_inner, 1, False,
                              (IterationRecord(centroid, moved, area),))


def _dedup(points: np.ndarray, width: int) -> np.ndarray:
    keys = points[:, 1] * width + points[:, 0]
    _, idx = np.unique(keys, return_index=True)
    return points[np.sort(idx)]


def _iterate(edges: EdgeImage, inner: Point, cfg: EstimatorConfig, depth: int,
             raster: bool) -> ProjectionEstimate:
    _check_origin(edges, inner)
    mask = edges.mask
    h, w = mask.shape
    n, m = cfg.n, cfg.m
    offs = fan_offsets(n, _length(edges))
    grid = np.zeros((-(-h // m), -(-w // m)), dtype=bool) if raster else None

    cur = tuple(inner)
    prev_centroid = (float(inner[0]), float(inner[1]))
    exhausted = False
    history = []
    for it in range(1, cfg.max_iterations + 1):
        origins = np.array([cur])
        used = 0
        for level in range(depth):
            if level:
                origins = _dedup(fan.free.reshape(-1, 2), w)
                room = (cfg.ray_budget - used) // n
                if len(origins) > room:
                    origins = origins[:room]
                    exhausted = True
                if not len(origins):
                    break
            fan = _cast(mask, origins, offs, block=m if raster else 0)
            used += len(origins) * n
            if raster:
                grid[fan.path[:, 1] // m, fan.path[:, 0] // m] = True

        if raster and grid.any():
            by, bx = np.nonzero(grid)
            half = (m - 1) / 2.0
            centroid = (float(bx.mean() * m + half), float(by.mean() * m + half))
            area = float(m * m * len(bx))
            blocks = frozenset(zip(bx.tolist(), by.tolist()))
        else:
            # also the raster fallback when the region is too small to cover a block center
            cx, cy = fan.hits.reshape(-1, 2).mean(axis=0)
            centroid = (float(cx), float(cy))
            area = 0.0 if raster else float(fan.lengths.sum())
            blocks = frozenset() if raster else None

        target = (min(max(round_half_up(centroid[0]), 0), w - 1),
                  min(max(round_half_up(centroid[1]), 0), h - 1))
        nxt = recenter(edges, displace_toward(edges, cur, target), n)
        moved_c = math.hypot(centroid[0] - prev_centroid[0], centroid[1] - prev_centroid[1])
        moved_i = math.hypot(nxt[0] - cur[0], nxt[1] - cur[1])
        cur, prev_centroid = nxt, centroid
        history.append(IterationRecord(centroid, cur, area, blocks))
        if moved_c < cfg.epsilon and moved_i < cfg.epsilon:
            break

    last = history[-1]
    return ProjectionEstimate(last.centroid, last.area, cur, len(history), exhausted, tuple(history))


def estimate_iter_nray(edges: EdgeImage, inner: Point, cfg: EstimatorConfig = EstimatorConfig()
                       ) -> ProjectionEstimate:
    return _iterate(edges, inner, cfg, 1, raster=False)


def estimate_iter_nyray(edges: EdgeImage, inner: Point, cfg: EstimatorConfig = EstimatorConfig()
                        ) -> ProjectionEstimate:
    return _iterate(edges, inner, cfg, cfg.y, raster=False)


def estimate_iter_nyray_raster(edges: EdgeImage, inner: Point,
                               cfg: EstimatorConfig = EstimatorConfig()) -> ProjectionEstimate:
    return _iterate(edges, inner, cfg, cfg.y, raster=True)


ESTIMATORS = {
    "nray": estimate_nray,
    "iter-nray": estimate_iter_nray,
    "nyray": estimate_iter_nyray,
    "nyray-raster": estimate_iter_nyray_raster,
}
