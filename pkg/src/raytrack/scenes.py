"""Deterministic synthetic scenes with per-frame ground truth, and a flood-fill oracle.

Object paths are given in subsampled (160x120) coordinates; frames are
rendered at the capture resolution, an integer multiple of it.

Scene files are plain text::

    duration = 200
    fps = 30
    size = 320x240
    background = uniform 250,250,250     # or: checker <cell> <r,g,b> <r,g,b>
    shape = disk                         # disk | square | hand
    aspect = 1                           # square height/width
    color = 20,20,20
    noise = 2
    brightness_jump = 50 40              # frame offset
    motion_blur = 0
    occlusion = 60 30 80 90              # x0 y0 x1 y1 [first last]
    seed = 1

    path:
    # frame  x   y   size
    0        80  60  30
    199      80  60  30

Path rows are keyframes, linearly interpolated and held past the ends.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from raytrack.pixels import EdgeImage, Frame

SUB_W, SUB_H = 160, 120

# Right hand, palm toward the camera, fingers spread; unit scale ~ 70x74 px.
HAND_POLYGON = np.array([
    (-22, 34), (-28, 14),
    (-46, -6), (-38, -14), (-24, 0),           # thumb
    (-26, -8), (-28, -40), (-16, -40), (-14, -8),   # index
    (-10, -8), (-8, -46), (4, -46), (2, -8),        # middle
    (6, -8), (10, -42), (22, -42), (18, -8),        # ring
    (22, -6), (28, -30), (38, -28), (30, 0),        # little
    (28, 34),
], dtype=np.float64)

# One point inside each finger lobe (unit scale, relative to the hand center).
HAND_FINGERTIPS = ((-38, -6), (-21, -32), (-2, -38), (16, -34), (32, -24))


class SceneError(ValueError):
    pass


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Occlusion:
    x0: int
    y0: int
    x1: int
    y1: int
    first: int = 0
    last: int | None = None

    def active(self, i: int) -> bool:
        return i >= self.first and (self.last is None or i <= self.last)


@dataclass(frozen=True)
class SceneScript:
    duration: int
    path: tuple[tuple[int, float, float, float], ...]   # (frame, x, y, size) keyframes
    fps: float = 30.0
    width: int = 320
    height: int = 240
    background: tuple = ("uniform", (250, 250, 250))
    shape: str = "disk"
    color: tuple[int, int, int] = (20, 20, 20)
    noise: int = 0
    brightness_jump: tuple[int, int] | None = None
    motion_blur: int = 0
    occlusions: tuple[Occlusion, ...] = ()
    occluder_color: tuple[int, int, int] = (120, 120, 120)
    seed: int = 0
    aspect: float = 1.0       # height / width, squares only

    def __post_init__(self):
        if self.duration < 1:
            raise SceneError("duration must be >= 1")
        if self.fps <= 0:
            raise SceneError("fps must be > 0")
        if self.width % SUB_W or self.height % SUB_H:
            raise SceneError(f"capture size {self.width}x{self.height} is not a multiple of 160x120")
        if self.shape not in ("disk", "square", "hand"):
            raise SceneError(f"unknown shape {self.shape!r}")
        if not self.path:
            raise SceneError("path needs at least one keyframe")
        object.__setattr__(self, "path", tuple(sorted(tuple(k) for k in self.path)))

    def at(self, i: int) -> tuple[float, float, float]:
        """Object center and size at frame ``i``."""
        frames = [k[0] for k in self.path]
        vals = np.array([k[1:] for k in self.path], dtype=np.float64)
        return tuple(float(np.interp(i, frames, vals[:, j])) for j in range(3))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    mask: np.ndarray
    centroid: tuple[float, float]
    area: int

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "GroundTruth":
        ys, xs = np.nonzero(mask)
        c = (float(xs.mean()), float(ys.mean())) if len(xs) else (float("nan"), float("nan"))
        return cls(mask, c, int(len(xs)))


def _points_in_polygon(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[-1]
    for x1, y1 in poly:
        crosses = (y1 > py) != (y0 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xi)
        x0, y0 = x1, y1
    return inside


def shape_mask(shape: str, u: np.ndarray, v: np.ndarray, cx: float, cy: float,
               size: float, aspect: float = 1.0) -> np.ndarray:
    """Membership of sample points ``(u, v)`` (subsampled units) in the shape.

    ``size`` is the disk radius, the square side, or the hand scale factor.
    A square with ``aspect != 1`` is a ``size x size*aspect`` rectangle.
    """
    if shape == "disk":
        return (u - cx) ** 2 + (v - cy) ** 2 <= size * size
    if shape == "square":
        return (np.abs(u - cx) <= size / 2.0) & (np.abs(v - cy) <= size * aspect / 2.0)
    if shape == "hand":
        return _points_in_polygon(u, v, HAND_POLYGON * size + (cx, cy))
    raise SceneError(f"unknown shape {shape!r}")


def _background(script: SceneScript, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    kind = script.background[0]
    if kind == "uniform":
        img = np.empty(u.shape + (3,), dtype=np.int16)
        img[:] = script.background[1]
        return img
    if kind == "checker":
        cell, a, b = script.background[1:]
        parity = (np.floor(u / cell) + np.floor(v / cell)).astype(int) % 2
        return np.where(parity[..., None] == 0, np.array(a, np.int16), np.array(b, np.int16))
    raise SceneError(f"unknown background {kind!r}")


def _motion_blur(img: np.ndarray, length: int) -> np.ndarray:
    if length <= 1:
        return img
    pad = length // 2
    p = np.pad(img, ((0, 0), (pad, length - 1 - pad), (0, 0)), mode="edge")
    csum = np.cumsum(p, axis=1, dtype=np.int32)
    csum = np.concatenate([np.zeros_like(csum[:, :1]), csum], axis=1)
    return (2 * (csum[:, length:] - csum[:, :-length]) + length) // (2 * length)


def render_frame(script: SceneScript, i: int) -> tuple[Frame, GroundTruth]:
    sx, sy = script.width // SUB_W, script.height // SUB_H
    cx, cy, size = script.at(i)
    if not (0 <= cx < SUB_W and 0 <= cy < SUB_H):
        raise SceneError(f"frame {i}: object center ({cx:g}, {cy:g}) outside 160x120")

    # capture pixel centers expressed in subsampled units
    u = (np.arange(script.width) + 0.5) / sx - 0.5
    v = (np.arange(script.height) + 0.5) / sy - 0.5
    uu, vv = np.meshgrid(u, v)
    img = _background(script, uu, vv)
    img[shape_mask(script.shape, uu, vv, cx, cy, size, script.aspect)] = script.color

    gx, gy = np.meshgrid(np.arange(SUB_W, dtype=np.float64), np.arange(SUB_H, dtype=np.float64))
    truth = shape_mask(script.shape, gx, gy, cx, cy, size, script.aspect)

    img = _motion_blur(img, script.motion_blur)
    for occ in script.occlusions:
        if occ.active(i):
            img[occ.y0 * sy:occ.y1 * sy, occ.x0 * sx:occ.x1 * sx] = script.occluder_color
            truth[occ.y0:occ.y1, occ.x0:occ.x1] = False
    if script.noise:
        rng = np.random.default_rng([script.seed, i])
        img = img + rng.integers(-script.noise, script.noise + 1, size=img.shape, dtype=np.int16)
    if script.brightness_jump and i >= script.brightness_jump[0]:
        img = img + script.brightness_jump[1]

    pixels = np.clip(img, 0, 255).astype(np.uint8)
    return Frame(pixels, i * 1000.0 / script.fps), GroundTruth.from_mask(truth)


def render(script: SceneScript) -> Iterator[tuple[Frame, GroundTruth]]:
    for i in range(script.duration):
        yield render_frame(script, i)


def flood_fill_oracle(edges: EdgeImage, inner: tuple[int, int]
                      ) -> tuple[tuple[float, float], int, np.ndarray]:
    """Exact region reachable from ``inner`` through 4-connected non-edge pixels."""
    x, y = inner
    if not edges.contains(x, y):
        raise OracleError(f"inner point {inner} out of bounds")
    blocked = edges.mask
    if blocked[y, x]:
        raise OracleError(f"inner point {inner} is an edge pixel")
    h, w = blocked.shape
    region = np.zeros((h, w), dtype=bool)
    region[y, x] = True
    queue = deque([(x, y)])
    while queue:
        px, py = queue.popleft()
        for qx, qy in ((px + 1, py), (px - 1, py), (px, py + 1), (px, py - 1)):
            if 0 <= qx < w and 0 <= qy < h and not region[qy, qx] and not blocked[qy, qx]:
                region[qy, qx] = True
                queue.append((qx, qy))
    ys, xs = np.nonzero(region)
    return (float(xs.mean()), float(ys.mean())), int(len(xs)), region


# -- edge images for estimator experiments ---------------------------------

def edge_circle(cx: int, cy: int, r: int, width: int = SUB_W, height: int = SUB_H) -> EdgeImage:
    """Ring of edge pixels within 0.75 px of radius ``r``.

    The ring is 4-connected, so neither 8-connected rays nor fills leak through.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    d = np.hypot(xx - cx, yy - cy)
    return EdgeImage.from_mask(np.abs(d - r) < 0.75)


def mask_edges(mask: np.ndarray) -> EdgeImage:
    """Sobel edge image of a binary silhouette (object 255 on 0)."""
    from raytrack.pixels import GrayImage, sobel_edges
    return sobel_edges(GrayImage(np.where(mask, 255, 0).astype(np.uint8)))


def hand_mask(cx: float = 84, cy: float = 66, scale: float = 1.0) -> np.ndarray:
    gx, gy = np.meshgrid(np.arange(SUB_W, dtype=np.float64), np.arange(SUB_H, dtype=np.float64))
    return shape_mask("hand", gx, gy, cx, cy, scale)


def hand_finger_points(cx: float = 84, cy: float = 66, scale: float = 1.0) -> list[tuple[int, int]]:
    return [(int(round(cx + fx * scale)), int(round(cy + fy * scale))) for fx, fy in HAND_FINGERTIPS]


# -- scene file parsing -----------------------------------------------------

def _color(s: str) -> tuple[int, int, int]:
    parts = [int(p) for p in s.split(",")]
    if len(parts) != 3 or any(not 0 <= p <= 255 for p in parts):
        raise SceneError(f"bad color {s!r}")
    return tuple(parts)


def parse_scene(text: str) -> SceneScript:
    kw: dict = {}
    occlusions = []
    path = []
    in_path = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.rstrip(":") == "path" and line.endswith(":"):
                in_path = True
                continue
            if in_path:
                f, x, y, s = line.split()
                path.append((int(f), float(x), float(y), float(s)))
                continue
            if "=" not in line:
                raise SceneError("expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key in ("duration", "noise", "motion_blur", "seed"):
                kw[key] = int(value)
            elif key in ("fps", "aspect"):
                kw[key] = float(value)
            elif key == "size":
                w, h = value.lower().split("x")
                kw["width"], kw["height"] = int(w), int(h)
            elif key == "background":
                parts = value.split()
                if parts[0] == "uniform":
                    kw[key] = ("uniform", _color(parts[1]))
                elif parts[0] == "checker":
                    kw[key] = ("checker", float(parts[1]), _color(parts[2]), _color(parts[3]))
                else:
                    raise SceneError(f"unknown background {parts[0]!r}")
            elif key == "shape":
                kw[key] = value
            elif key in ("color", "occluder_color"):
                kw[key] = _color(value)
            elif key == "brightness_jump":
                f, off = value.split()
                kw[key] = (int(f), int(off))
            elif key == "occlusion":
                nums = [int(p) for p in value.split()]
                occlusions.append(Occlusion(*nums))
            else:
                raise SceneError(f"unknown key {key!r}")
        except SceneError as exc:
            raise SceneError(f"line {lineno}: {exc}") from None
        except (ValueError, IndexError, TypeError):
            raise SceneError(f"line {lineno}: cannot parse {line!r}") from None
    if "duration" not in kw:
        raise SceneError("missing 'duration'")
    return SceneScript(path=tuple(path), occlusions=tuple(occlusions), **kw)


def load_scene(path: str | Path) -> SceneScript:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SceneError(f"cannot read scene {path}: {exc.strerror}") from None
    return parse_scene(text)


def dump_scene(script: SceneScript) -> str:
    c = ",".join
    lines = [
        f"duration = {script.duration}",
        f"fps = {script.fps:g}",
        f"size = {script.width}x{script.height}",
    ]
    bg = script.background
    if bg[0] == "uniform":
        lines.append(f"background = uniform {c(map(str, bg[1]))}")
    else:
        lines.append(f"background = checker {bg[1]:g} {c(map(str, bg[2]))} {c(map(str, bg[3]))}")
    lines += [
        f"shape = {script.shape}",
        f"color = {c(map(str, script.color))}",
        f"noise = {script.noise}",
        f"motion_blur = {script.motion_blur}",
        f"occluder_color = {c(map(str, script.occluder_color))}",
        f"seed = {script.seed}",
        f"aspect = {script.aspect:g}",
    ]
    if script.brightness_jump:
        lines.append(f"brightness_jump = {script.brightness_jump[0]} {script.brightness_jump[1]}")
    for o in script.occlusions:
        extra = f" {o.first} {o.last}" if o.last is not None else (f" {o.first}" if o.first else "")
        lines.append(f"occlusion = {o.x0} {o.y0} {o.x1} {o.y1}{extra}")
    lines += ["", "path:"]
    lines += [f"{f} {x:g} {y:g} {s:g}" for f, x, y, s in script.path]
    return "\n".join(lines) + "\n"
