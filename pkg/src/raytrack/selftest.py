"""Quick invariant checks runnable from the command line (``raytrack selftest``)."""

from __future__ import annotations

import math
from typing import Callable, Iterator, NamedTuple

import numpy as np

from raytrack.config import Config
from raytrack.pixels import Frame, abs_diff, poisson_blur, preprocess, sobel_edges, subsample, to_gray
from raytrack.raycast import estimate_iter_nyray_raster
from raytrack.scenarios import SUITE
from raytrack.scenes import edge_circle, flood_fill_oracle, render
from raytrack.streams import emit_text, track
from raytrack.tracker import TRANSITIONS, Mode


class Check(NamedTuple):
    name: str
    ok: bool
    detail: str = ""


def _random_frame(rng: np.random.Generator, w: int = 320, h: int = 240) -> Frame:
    return Frame(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def check_uniform_preserved() -> Check:
    f = Frame(np.full((240, 320, 3), 77, dtype=np.uint8))
    out = subsample(poisson_blur(f, 5))
    return Check("uniform frames survive blur and subsample", bool((out.pixels == 77).all()))


def check_sobel_uniform() -> Check:
    f = Frame(np.full((120, 160, 3), 200, dtype=np.uint8))
    return Check("uniform image has no edges", not sobel_edges(to_gray(f)).mask.any())


def check_diff_symmetric() -> Check:
    rng = np.random.default_rng(11)
    a, b = _random_frame(rng, 160, 120), _random_frame(rng, 160, 120)
    ok = np.array_equal(abs_diff(a, b).values, abs_diff(b, a).values)
    return Check("abs_diff is symmetric", ok)


def check_pipeline_deterministic() -> Check:
    rng = np.random.default_rng(12)
    a, b = _random_frame(rng), _random_frame(rng)
    p, q = preprocess(b, preprocess(a).small), preprocess(b, preprocess(a).small)
    ok = (np.array_equal(p.edges.magnitudes, q.edges.magnitudes)
          and np.array_equal(p.diff.values, q.diff.values))
    return Check("pipeline is deterministic", ok)


def check_circle_accuracy() -> Check:
    bad = []
    for r in (15, 25, 35, 45):
        edges = edge_circle(80, 60, r)
        (ox, oy), area, _ = flood_fill_oracle(edges, (80, 60))
        est = estimate_iter_nyray_raster(edges, (80, 60))
        if abs(est.area - area) > 0.2 * area or math.dist(est.centroid, (ox, oy)) > 3:
            bad.append(r)
    return Check("raster estimate within 20% / 3 px on edge circles", not bad,
                 f"failing radii {bad}" if bad else "")


def check_fsm(names: list[str]) -> Iterator[Check]:
    for name in names:
        frames = (f for f, _ in render(SUITE[name]()))
        seen, bad_end = set(), 0
        for _, result in track(frames, Config()):
            seen |= set(zip(result.modes, result.modes[1:]))
            if result.modes[-1] not in (Mode.INITIALIZING, Mode.SEARCHING, Mode.TRACKING):
                bad_end += 1
        illegal = sorted((a.value, b.value) for a, b in seen - TRANSITIONS)
        ok = not illegal and not bad_end
        yield Check(f"state machine conformance on {name}", ok,
                    f"illegal {illegal}, {bad_end} steps ended mid-validation" if not ok else "")


def check_replay(name: str) -> Check:
    def once() -> str:
        frames = (f for f, _ in render(SUITE[name]()))
        return emit_text(rec for rec, _ in track(frames))
    return Check(f"byte-identical replay of {name}", once() == once())


QUICK = ["teleport-bar", "brightness-jump", "low-light-blur"]


def run_selftest(full: bool = False) -> list[Check]:
    checks: list[Callable[[], Check]] = [
        check_uniform_preserved, check_sobel_uniform, check_diff_symmetric,
        check_pipeline_deterministic, check_circle_accuracy,
    ]
    out = [c() for c in checks]
    out += check_fsm(list(SUITE) if full else QUICK)
    out.append(check_replay("teleport-bar"))
    return out
