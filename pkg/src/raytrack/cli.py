"""Command-line entry point: ``raytrack {track,estimate,synth,selftest,bench}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from raytrack import __version__
from raytrack.config import Config, ConfigError, load_config
from raytrack.pixels import EdgeImage, Frame, to_gray
from raytrack.raycast import ESTIMATORS, EdgeOriginError, OutOfBoundsError
from raytrack.scenes import SceneError, load_scene, render
from raytrack.streams import (
    FormatError,
    FrameSource,
    emit,
    prefetch,
    read_frames,
    read_pnm,
    track,
    write_frame_dir,
    write_pnm,
    write_sltk,
)

PROG = "raytrack"


class CLIError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser, sections: tuple[str, ...]) -> None:
    g = p.add_argument_group("configuration overrides")
    g.add_argument("--config", metavar="FILE", help="flat 'key = value' config file")
    for key, (section, _) in Config.keys().items():
        if section in sections:
            g.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar="V")


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return cfg.with_overrides(overrides)


def _point(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y but got {text!r}") from None
    return x, y


def _positive(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Markerless monocular 3D position tracker.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track an object through a frame stream")
    src = t.add_mutually_exclusive_group()
    src.add_argument("--frames", metavar="DIR", help="directory of numbered P6 .ppm files")
    src.add_argument("--raw", metavar="FILE", help="SLTK raw stream")
    src.add_argument("--scene", metavar="FILE", help="render a scene file on the fly")
    t.add_argument("--fps", type=_positive, help="frame rate for timestamps (default: 30, or the SLTK header)")
    t.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    t.add_argument("--csv-header", action="store_true", help="write a column-name row first")
    t.add_argument("--output", "-o", metavar="FILE", help="trace destination (default: stdout)")
    t.add_argument("--dump-dir", metavar="DIR", help="write annotated 160x120 frames here")
    t.add_argument("--prefetch", type=int, default=8, metavar="N",
                   help="frames decoded ahead on a worker thread (0 disables)")
    t.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    _add_config_flags(t, ("pipeline", "estimator", "tracker"))

    e = sub.add_parser("estimate", help="one-shot projection estimate on an edge image")
    e.add_argument("--edges", required=True, metavar="PGM", help="P5 magnitudes (or P6, converted to luma)")
    e.add_argument("--inner", required=True, type=_point, metavar="X,Y")
    e.add_argument("--algo", choices=sorted(ESTIMATORS), default="nyray-raster")
    _add_config_flags(e, ("pipeline", "estimator"))

    s = sub.add_parser("synth", help="render a scene file to frames")
    s.add_argument("--scene", required=True, metavar="FILE")
    out = s.add_mutually_exclusive_group(required=True)
    out.add_argument("--out", metavar="FILE", help="SLTK stream")
    out.add_argument("--out-dir", metavar="DIR", help="directory of numbered P6 files")
    s.add_argument("--truth", metavar="FILE", help="also write per-frame ground truth as jsonl")

    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--full", action="store_true", help="include every standard scene")

    b = sub.add_parser("bench", help="per-frame latency percentiles")
    b.add_argument("--scene", metavar="FILE", help="scene to replay (default: disk translation)")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--budget-ms", type=_positive, default=33.0,
                   help="exit nonzero if the median exceeds this")
    _add_config_flags(b, ("pipeline", "estimator", "tracker"))
    return parser


def _annotate(small: Frame, rec) -> np.ndarray:
    img = small.pixels.copy()
    h, w = img.shape[:2]

    def cross(x: float, y: float, color):
        x, y = int(round(x)), int(round(y))
        for d in range(-2, 3):
            if 0 <= x + d < w and 0 <= y < h:
                img[y, x + d] = color
            if 0 <= x < w and 0 <= y + d < h:
                img[y + d, x] = color

    if rec.centroid:
        cross(*rec.centroid, (0, 255, 0))
    if rec.inner:
        cross(*rec.inner, (255, 0, 0))
    return img


def cmd_track(args) -> int:
    config = _config(args)
    if args.print_config:
        sys.stdout.write(config.dump())
        return 0
    if args.frames:
        source = FrameSource("dir", args.frames, args.fps)
    elif args.raw:
        source = FrameSource("raw", args.raw, args.fps)
    elif args.scene:
        source = FrameSource("scene", args.scene, args.fps)
    else:
        raise CLIError("one of --frames, --raw or --scene is required")
    frames = read_frames(source)
    if args.prefetch > 0:
        frames = prefetch(frames, args.prefetch)
    dump = Path(args.dump_dir) if args.dump_dir else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)

    def records():
        for rec, result in track(frames, config):
            if dump and result.state.prev_frame is not None:
                write_pnm(dump / f"{rec.frame + 1:06d}.ppm", _annotate(result.state.prev_frame, rec))
            yield rec

    if args.output:
        with open(args.output, "w", newline="") as fh:
            emit(records(), args.format, fh, args.csv_header)
    else:
        emit(records(), args.format, sys.stdout, args.csv_header)
    return 0


def cmd_estimate(args) -> int:
    config = _config(args)
    pixels = read_pnm(args.edges)
    if pixels.ndim == 3:
        pixels = to_gray(Frame(pixels)).values
    edges = EdgeImage(pixels, config.pipeline.edge_threshold)
    est = ESTIMATORS[args.algo](edges, args.inner, config.estimator)
    print(json.dumps({
        "algo": args.algo,
        "centroid": [round(v, 6) for v in est.centroid],
        "area": round(est.area, 6),
        "inner": list(est.inner),
        "iterations": est.iterations,
        "budget_exhausted": est.budget_exhausted,
    }))
    return 0


def cmd_synth(args) -> int:
    script = load_scene(args.scene)
    truth = open(args.truth, "w") if args.truth else None
    try:
        def frames():
            for i, (frame, gt) in enumerate(render(script)):
                if truth:
                    truth.write(json.dumps({"frame": i, "centroid": [round(v, 6) for v in gt.centroid],
                                            "area": gt.area}) + "\n")
                yield frame

        if args.out:
            if not float(script.fps).is_integer():
                raise CLIError(f"SLTK streams store an integer fps, scene has {script.fps:g}")
            n = write_sltk(args.out, frames(), int(script.fps))
        else:
            n = write_frame_dir(args.out_dir, frames())
    finally:
        if truth:
            truth.close()
    print(f"wrote {n} frames", file=sys.stderr)
    return 0


def cmd_selftest(args) -> int:
    from raytrack.selftest import run_selftest

    failed = 0
    for check in run_selftest(args.full):
        failed += not check.ok
        line = f"{'PASS' if check.ok else 'FAIL'} {check.name}"
        print(line + (f": {check.detail}" if check.detail else ""))
    print(f"{failed} failed" if failed else "all checks passed")
    return 1 if failed else 0


def cmd_bench(args) -> int:
    from raytrack.bench import run_bench

    script = load_scene(args.scene) if args.scene else None
    res = run_bench(script, _config(args), args.repeats)
    print(res.report())
    return 0 if res.p50_ms <= args.budget_ms else 1


COMMANDS = {"track": cmd_track, "estimate": cmd_estimate, "synth": cmd_synth,
            "selftest": cmd_selftest, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CLIError, ConfigError, FormatError, SceneError, OutOfBoundsError, EdgeOriginError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        name = exc.filename or ""
        print(f"{PROG}: error: {exc.strerror + ': ' + str(name) if exc.strerror else exc}", file=sys.stderr)
    except BrokenPipeError:
        pass
    except OSError as exc:
        print(f"{PROG}: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
    except ValueError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
