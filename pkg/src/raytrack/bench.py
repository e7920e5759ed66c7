"""Per-frame latency of the full tracking step (preprocess, estimate, state machine)."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from raytrack.config import Config
from raytrack.scenarios import disk_translation
from raytrack.scenes import SceneScript, render
from raytrack.tracker import Mode, Tracker


@dataclass(frozen=True)
class BenchResult:
    frames: int
    tracking_frames: int
    p50_ms: float
    p99_ms: float
    mean_ms: float

    def report(self) -> str:
        return (f"frames={self.frames} tracking={self.tracking_frames} "
                f"p50={self.p50_ms:.2f}ms p99={self.p99_ms:.2f}ms mean={self.mean_ms:.2f}ms")


def run_bench(script: SceneScript | None = None, config: Config = Config(),
              repeats: int = 1) -> BenchResult:
    """Time ``Tracker.feed`` on pre-rendered frames.

    Steps that start in INITIALIZING do no image work and are left out.
    """
    script = script or disk_translation()
    frames = [f for f, _ in render(script)]
    samples, tracking = [], 0
    for _ in range(repeats):
        tracker = Tracker(config)
        for frame in frames:
            busy = tracker.state.mode is not Mode.INITIALIZING
            t0 = time.perf_counter()
            result = tracker.feed(frame)
            dt = (time.perf_counter() - t0) * 1000.0
            if busy:
                samples.append(dt)
                tracking += result.modes[-1] is Mode.TRACKING
    if not samples:
        raise ValueError("scene too short: every frame was spent initializing")
    a = np.array(samples)
    return BenchResult(len(a), tracking, float(np.percentile(a, 50)),
                       float(np.percentile(a, 99)), float(a.mean()))
