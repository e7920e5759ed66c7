"""Acceptance criteria 1-11, one test each, every test reporting a PASS/FAIL line."""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from raytrack.bench import run_bench
from raytrack.config import Config
from raytrack.raycast import estimate_iter_nyray, estimate_iter_nyray_raster, estimate_nray
from raytrack.scenarios import (
    GROWTH_FRAMES,
    GROWTH_START,
    JUMP_FRAME,
    SUITE,
    TELEPORT_FRAME,
    TRANSLATION_ONSET,
)
from raytrack.scenes import edge_circle, flood_fill_oracle, hand_finger_points, hand_mask, mask_edges, render
from raytrack.streams import emit_text, track
from raytrack.tracker import TRANSITIONS, Mode

STABLE = (Mode.INITIALIZING, Mode.SEARCHING, Mode.TRACKING)


# -- estimator inputs ------------------------------------------------------------------

def circle_cases(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        r = int(rng.integers(15, 46))
        cx = int(rng.integers(r + 2, 160 - r - 2))
        cy = int(rng.integers(r + 2, 120 - r - 2))
        cases.append((edge_circle(cx, cy, r), (cx, cy)))
    return cases


@pytest.fixture(scope="module")
def circles():
    return [(e, p, estimate_iter_nyray_raster(e, p)) for e, p in circle_cases()]


@pytest.fixture(scope="module")
def fingers():
    edges = mask_edges(hand_mask())
    return [(edges, p, estimate_iter_nyray_raster(edges, p)) for p in hand_finger_points()]


def test_criterion_01_convex_accuracy(circles, verdict):
    good = 0
    for edges, inner, est in circles:
        centroid, area, _ = flood_fill_oracle(edges, inner)
        good += abs(est.area - area) <= 0.2 * area and math.dist(est.centroid, centroid) <= 3
    verdict(1, "convex accuracy", good >= 48, f"{good}/50 circles within 20% area and 3 px")


def test_criterion_02_non_convex_accuracy(fingers, verdict):
    raster_ok = nray_fail = 0
    for edges, inner, est in fingers:
        _, area, region = flood_fill_oracle(edges, inner)
        x, y = est.inner
        raster_ok += bool(region[y, x]) and abs(est.area - area) <= 0.25 * area
        nray_fail += abs(estimate_nray(edges, inner).area - area) > 0.25 * area
    verdict(2, "non-convex accuracy", raster_ok == 5 and nray_fail >= 3,
            f"raster ok {raster_ok}/5, plain n-ray outside the area bound {nray_fail}/5")


def test_criterion_03_iteration_ordering(fingers, verdict):
    pairs = [(est.iterations, estimate_iter_nyray(edges, inner).iterations)
             for edges, inner, est in fingers]
    ok = all(r <= n for r, n in pairs)
    verdict(3, "iteration ordering", ok, f"(raster, n^y-ray) iterations {pairs}")


def test_criterion_04_monotone_raster(circles, fingers, verdict):
    runs = [est for _, _, est in circles + fingers]
    shrinking = sum(
        any(not (a.blocks <= b.blocks and a.area <= b.area) for a, b in zip(e.history, e.history[1:]))
        for e in runs)
    longest = max(e.iterations for e in runs)
    verdict(4, "monotone raster", shrinking == 0 and longest <= 10,
            f"{len(runs)} runs, {shrinking} with shrinking blocks or area, max {longest} iterations")


# -- scenario runs ------------------------------------------------------------------------

@dataclass
class Run:
    results: list
    truths: list
    trace: str


def run_scene(name):
    rendered = list(render(SUITE[name]()))
    pairs = list(track(f for f, _ in rendered))
    return Run([res for _, res in pairs], [gt for _, gt in rendered],
               emit_text(rec for rec, _ in pairs))


@pytest.fixture(scope="module")
def suite_runs():
    return {name: run_scene(name) for name in SUITE}


def inside(gt, point):
    x, y = point
    return bool(gt.mask[y, x])


def test_criterion_05_tracking(suite_runs, verdict):
    run = suite_runs["disk-translation"]
    tracking = [i for i, r in enumerate(run.results) if r.modes[-1] is Mode.TRACKING]
    first = tracking[0] if tracking else None
    hits = sum(inside(run.truths[i], run.results[i].state.inner) for i in tracking)
    share = hits / len(tracking) if tracking else 0.0
    ok = first is not None and TRANSLATION_ONSET <= first <= TRANSLATION_ONSET + 3 and share >= 0.95
    verdict(5, "translation tracking", ok,
            f"onset {TRANSLATION_ONSET}, first TRACKING {first}, inner inside mask "
            f"{hits}/{len(tracking)} ({share:.1%})")


def test_criterion_06_brightness_jump(suite_runs, verdict):
    results = suite_runs["brightness-jump"].results
    at, before = results[JUMP_FRAME], results[JUMP_FRAME - 1]
    ok = at.movement < 4800 and at.modes == (before.modes[-1],)
    verdict(6, "brightness jump", ok,
            f"movement {at.movement} (compensation {at.compensation}), "
            f"mode {before.modes[-1].value} -> {[m.value for m in at.modes]}")


def test_criterion_07_recovery(suite_runs, verdict):
    run = suite_runs["teleport-bar"]
    res, gt = run.results[TELEPORT_FRAME], run.truths[TELEPORT_FRAME]
    prev_inner = run.results[TELEPORT_FRAME - 1].state.inner
    want = (Mode.TRACKING, Mode.VALIDATING, Mode.RECOVERING, Mode.TRACKING)
    cand = res.recovery_point
    ok = (res.modes == want and prev_inner is not None and not inside(gt, prev_inner)
          and cand is not None and inside(gt, cand))
    verdict(7, "recovery", ok,
            f"modes {[m.value for m in res.modes]}, stale inner {prev_inner} "
            f"{'outside' if prev_inner and not inside(gt, prev_inner) else 'inside'} mask, "
            f"candidate {cand}")


def test_criterion_08_depth(suite_runs, verdict):
    results = suite_runs["growing-disk"].results
    end = GROWTH_START + GROWTH_FRAMES
    span = results[GROWTH_START + 20:end + 1]
    tracked = all(r.output is not None for r in results[GROWTH_START:])
    zs = [r.output.z for r in span] if tracked else []
    rising = tracked and all(b > a for a, b in zip(zs, zs[1:]))
    gaps = [abs(r.output.z - r.raw.z) for r in results[end + 50:]] if tracked else [math.inf]
    ok = rising and max(gaps) <= 0.5
    verdict(8, "depth monotonicity", ok,
            f"tracked throughout {tracked}, smoothed z strictly rising over frames "
            f"{GROWTH_START + 20}..{end}: {rising}, max |z - raw| from frame {end + 50}: "
            f"{max(gaps):.3f}")


def test_criterion_09_fsm_conformance(suite_runs, verdict):
    seen, lingering = set(), 0
    for run in suite_runs.values():
        for r in run.results:
            seen |= set(zip(r.modes, r.modes[1:]))
            lingering += r.modes[-1] not in STABLE or r.state.mode not in STABLE
    illegal = seen - TRANSITIONS
    verdict(9, "state machine conformance", not illegal and not lingering,
            f"{len(seen)} distinct transitions over {len(suite_runs)} scenes, "
            f"illegal {sorted((a.value, b.value) for a, b in illegal)}, "
            f"{lingering} steps ending in VALIDATING or RECOVERING")


def test_criterion_10_realtime(verdict):
    res = run_bench(SUITE["disk-translation"](), Config())
    verdict(10, "real-time budget", res.p50_ms <= 33.0, res.report())


def test_criterion_11_determinism(suite_runs, verdict):
    differing = [name for name, run in suite_runs.items() if run_scene(name).trace != run.trace]
    verdict(11, "determinism", not differing,
            f"{len(suite_runs) - len(differing)}/{len(suite_runs)} scenes replay byte-identically")
