"""Five-mode tracking state machine and 3D coordinate output.

Modes at rest between frames are INITIALIZING, SEARCHING and TRACKING.
VALIDATING and RECOVERING run inside the same ``step`` call that entered
them, on the frame that triggered them.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from raytrack.config import Config, TrackerConfig
from raytrack.pixels import EdgeImage, Frame, Preprocessed, center_of_mass, preprocess
from raytrack.raycast import COMPASS, Point, ProjectionEstimate, estimate_iter_nyray_raster


class Mode(str, enum.Enum):
    INITIALIZING = "INITIALIZING"
    SEARCHING = "SEARCHING"
    TRACKING = "TRACKING"
    VALIDATING = "VALIDATING"
    RECOVERING = "RECOVERING"


# Transitions allowed by the state machine, used by conformance checks.
TRANSITIONS = frozenset({
    (Mode.INITIALIZING, Mode.INITIALIZING),
    (Mode.INITIALIZING, Mode.SEARCHING),
    (Mode.SEARCHING, Mode.SEARCHING),
    (Mode.SEARCHING, Mode.TRACKING),
    (Mode.TRACKING, Mode.VALIDATING),
    (Mode.TRACKING, Mode.SEARCHING),
    (Mode.VALIDATING, Mode.TRACKING),
    (Mode.VALIDATING, Mode.RECOVERING),
    (Mode.RECOVERING, Mode.TRACKING),
    (Mode.RECOVERING, Mode.SEARCHING),
})


class TimestampError(ValueError):
    pass


class ReferenceAreaError(ValueError):
    pass


class Coord3D(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True, eq=False)
class TrackerState:
    mode: Mode = Mode.INITIALIZING
    inner: Point | None = None
    prev_frame: Frame | None = None          # previous subsampled frame
    reference_area: float | None = None
    smoothed: Coord3D | None = None
    low_movement_since: float | None = None
    init_deadline: float | None = None
    last_timestamp: float | None = None

    @property
    def prev_inner(self) -> Point | None:
        return self.inner


class StepResult(NamedTuple):
    state: TrackerState
    output: Coord3D | None
    modes: tuple[Mode, ...]
    movement: int = 0
    compensation: int = 0
    estimate: ProjectionEstimate | None = None
    raw: Coord3D | None = None
    recovery_point: Point | None = None


def window_mean(frame: Frame, p: Point, size: int = 5) -> np.ndarray:
    """Channel means over the ``size x size`` window at ``p``, clipped to the image."""
    half = size // 2
    x, y = p
    win = frame.pixels[max(y - half, 0):y + half + 1, max(x - half, 0):x + half + 1]
    return win.reshape(-1, 3).mean(axis=0)


def color_distance(frame_a: Frame, point_a: Point, frame_b: Frame, point_b: Point,
                   size: int = 5) -> float:
    return float(np.abs(window_mean(frame_a, point_a, size) - window_mean(frame_b, point_b, size)).sum())


def color_match(frame_a: Frame, point_a: Point, frame_b: Frame, point_b: Point,
                cfg: TrackerConfig = TrackerConfig()) -> bool:
    return color_distance(frame_a, point_a, frame_b, point_b, cfg.color_window) <= cfg.color_threshold


def recovery_points(inner: Point, width: int, height: int,
                    offsets: tuple[int, ...] = (10, 20)) -> list[Point]:
    """Candidates at each offset distance in N, NE, E, SE, S, SW, W, NW order."""
    out = []
    for d in sorted(offsets):
        for ux, uy in COMPASS:
            x, y = inner[0] + d * ux, inner[1] + d * uy
            if 0 <= x < width and 0 <= y < height:
                out.append((x, y))
    return out


def estimate_coords(centroid: tuple[float, float], area: float, reference_area: float) -> Coord3D:
    """Depth grows as the projection grows; zero at the reference area."""
    if reference_area <= 0:
        raise ReferenceAreaError("reference area must be positive")
    if area < 0:
        raise ValueError("area must be >= 0")
    return Coord3D(float(centroid[0]), float(centroid[1]), math.sqrt(area) - math.sqrt(reference_area))


def smooth(previous: Coord3D | None, new: Coord3D, factor: float = 0.9) -> Coord3D:
    if previous is None:
        return Coord3D(*new)
    return Coord3D(*(factor * p + (1.0 - factor) * q for p, q in zip(previous, new)))


def _free_point(edges: EdgeImage, p: Point, reach: int = 3) -> Point | None:
    """``p`` itself, or the closest non-edge pixel within ``reach`` rings."""
    if not edges.is_edge(*p):
        return p
    for r in range(1, reach + 1):
        best = None
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                q = (p[0] + dx, p[1] + dy)
                if edges.contains(*q) and not edges.is_edge(*q):
                    d = dx * dx + dy * dy
                    if best is None or d < best[0]:
                        best = (d, q)
        if best:
            return best[1]
    return None


def recover(state: TrackerState, frame: Frame, edges: EdgeImage, failed_inner: Point,
            config: Config = Config()) -> tuple[TrackerState, ProjectionEstimate | None, Point | None]:
    """Relocate the inner point around ``failed_inner`` by color matching.

    Returns the state to continue from (mode TRACKING or SEARCHING), the
    recovered estimate if any, and the candidate recovery point if one matched.
    Ties between equally good candidates go to the earliest in enumeration order.
    """
    cfg = config.tracker
    best = None
    for cand in recovery_points(failed_inner, edges.width, edges.height, cfg.recovery_offsets):
        if edges.is_edge(*cand):
            continue
        d = color_distance(state.prev_frame, state.inner, frame, cand, cfg.color_window)
        if d <= cfg.color_threshold and (best is None or d < best[0]):
            best = (d, cand)
    if best is None:
        return dataclasses.replace(state, mode=Mode.SEARCHING), None, None
    est = estimate_iter_nyray_raster(edges, best[1], config.estimator)
    if color_match(state.prev_frame, state.inner, frame, est.inner, cfg):
        return dataclasses.replace(state, mode=Mode.TRACKING), est, best[1]
    return dataclasses.replace(state, mode=Mode.SEARCHING), None, best[1]


def _lose(state: TrackerState, pre: Preprocessed, t: float) -> TrackerState:
    return TrackerState(Mode.SEARCHING, None, pre.small, None, None, None,
                        state.init_deadline, t)


def step(state: TrackerState, frame: Frame, config: Config = Config()) -> StepResult:
    """Consume one captured frame."""
    t = frame.timestamp
    if state.last_timestamp is not None and t <= state.last_timestamp:
        raise TimestampError(f"timestamp {t} does not increase past {state.last_timestamp}")
    cfg = config.tracker

    if state.mode is Mode.INITIALIZING:
        deadline = state.init_deadline if state.init_deadline is not None else t + cfg.init_delay_ms
        if t < deadline:
            return StepResult(dataclasses.replace(state, init_deadline=deadline, last_timestamp=t),
                              None, (Mode.INITIALIZING,))
        pre = preprocess(frame, None, config.pipeline)
        nxt = TrackerState(Mode.SEARCHING, prev_frame=pre.small, init_deadline=deadline,
                           last_timestamp=t)
        return StepResult(nxt, None, (Mode.INITIALIZING, Mode.SEARCHING))

    pre = preprocess(frame, state.prev_frame, config.pipeline)
    mv, comp = pre.movement, pre.compensation

    if state.mode is Mode.SEARCHING:
        if pre.diff is None or mv <= cfg.acquire_threshold:
            nxt = dataclasses.replace(state, prev_frame=pre.small, last_timestamp=t)
            return StepResult(nxt, None, (Mode.SEARCHING,), mv, comp)
        com = center_of_mass(pre.diff)
        out = Coord3D(float(com[0]), float(com[1]), 0.0)
        nxt = TrackerState(Mode.TRACKING, com, pre.small, None, out, None, state.init_deadline, t)
        return StepResult(nxt, out, (Mode.SEARCHING, Mode.TRACKING), mv, comp, None, out)

    # TRACKING
    modes = [Mode.TRACKING]
    low_since = state.low_movement_since
    if mv < cfg.idle_threshold:
        low_since = t if low_since is None else low_since
        if t - low_since >= cfg.idle_timeout_ms:
            return StepResult(_lose(state, pre, t), None, (Mode.TRACKING, Mode.SEARCHING), mv, comp)
    else:
        low_since = None

    start = _free_point(pre.edges, state.inner)
    if start is None:
        return StepResult(_lose(state, pre, t), None, (Mode.TRACKING, Mode.SEARCHING), mv, comp)
    est = estimate_iter_nyray_raster(pre.edges, start, config.estimator)
    screen = pre.edges.width * pre.edges.height
    frac = est.area / screen
    if frac > cfg.max_area_fraction or frac < cfg.min_area_fraction:
        return StepResult(_lose(state, pre, t), None, (Mode.TRACKING, Mode.SEARCHING), mv, comp, est)

    modes.append(Mode.VALIDATING)
    candidate = None
    if not color_match(state.prev_frame, state.inner, pre.small, est.inner, cfg):
        modes.append(Mode.RECOVERING)
        _, rec, candidate = recover(state, pre.small, pre.edges, est.inner, config)
        if rec is None:
            modes.append(Mode.SEARCHING)
            return StepResult(_lose(state, pre, t), None, tuple(modes), mv, comp, est, None, candidate)
        est = rec
    modes.append(Mode.TRACKING)

    # the area bounds above keep every accepted area positive
    ref = state.reference_area if state.reference_area is not None else est.area
    raw = estimate_coords(est.centroid, est.area, ref)
    out = smooth(state.smoothed, raw, cfg.smoothing)
    nxt = TrackerState(Mode.TRACKING, est.inner, pre.small, ref, out, low_since,
                       state.init_deadline, t)
    return StepResult(nxt, out, tuple(modes), mv, comp, est, raw, candidate)


class Tracker:
    """Owns a ``TrackerState`` and feeds it frames in order."""

    def __init__(self, config: Config = Config()):
        self.config = config
        self.state = TrackerState()

    def feed(self, frame: Frame) -> StepResult:
        result = step(self.state, frame, self.config)
        self.state = result.state
        return result
