"""Frame ingestion and trace emission.

Two on-disk frame formats are supported:

* a directory of numbered binary pixmaps (``P6``, maxval 255), one per frame;
* an ``SLTK`` stream: a 16-byte header (``b"SLTK"`` then little-endian u32
  width, height, fps) followed by raw RGB frames of ``width * height * 3`` bytes.

Timestamps are never read from files; frame ``i`` is stamped ``i * 1000 / fps``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import queue
import re
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from raytrack.pixels import Frame
from raytrack.tracker import StepResult

SLTK_MAGIC = b"SLTK"
SLTK_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    pass


class MalformedHeaderError(FormatError):
    pass


class UnsupportedMaxvalError(FormatError):
    pass


class DimensionMismatchError(FormatError):
    pass


class TruncatedFrameError(FormatError):
    pass


# -- portable any-maps ------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def decode_pnm(data: bytes, name: str = "<bytes>") -> np.ndarray:
    """Decode a binary ``P6`` (h, w, 3) or ``P5`` (h, w) image with maxval 255."""
    tokens, pos = [], 0
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if not m:
            raise MalformedHeaderError(f"{name}: truncated pixmap header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise MalformedHeaderError(f"{name}: unsupported magic {magic!r}, expected P5 or P6")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeaderError(f"{name}: non-numeric pixmap header") from None
    if maxval != 255:
        raise UnsupportedMaxvalError(f"{name}: unsupported maxval {maxval}, only 255 is accepted")
    if w <= 0 or h <= 0:
        raise MalformedHeaderError(f"{name}: bad dimensions {w}x{h}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeaderError(f"{name}: missing whitespace after header")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    need = w * h * channels
    if len(data) - pos < need:
        raise TruncatedFrameError(f"{name}: pixel data truncated at byte {len(data)}, "
                                  f"expected {need} bytes from offset {pos}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape((h, w, 3) if channels == 3 else (h, w))


def read_pnm(path: str | Path) -> np.ndarray:
    path = Path(path)
    return decode_pnm(path.read_bytes(), str(path))


def encode_pnm(pixels: np.ndarray) -> bytes:
    """``P6`` for (h, w, 3) arrays, ``P5`` for (h, w)."""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    elif pixels.ndim == 2:
        magic = b"P5"
    else:
        raise ValueError(f"cannot encode array of shape {pixels.shape}")
    h, w = pixels.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + pixels.tobytes()


def write_pnm(path: str | Path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(pixels))


# -- frame sources ----------------------------------------------------------

def _timestamp(i: int, fps: float) -> float:
    return i * 1000.0 / fps


def _numbered(directory: Path) -> list[Path]:
    files = []
    for p in directory.iterdir():
        m = re.search(r"(\d+)\D*$", p.name)
        if p.is_file() and p.suffix.lower() in (".ppm", ".pnm") and m:
            files.append((int(m.group(1)), p.name, p))
    return [p for _, _, p in sorted(files)]


def read_frame_dir(directory: str | Path, fps: float = 30.0) -> Iterator[Frame]:
    """Frames from numbered ``.ppm`` files, in numeric order."""
    if fps <= 0:
        raise ValueError("fps must be > 0")
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    shape = None
    for i, path in enumerate(_numbered(directory)):
        pixels = read_pnm(path)
        if pixels.ndim != 3:
            raise MalformedHeaderError(f"{path}: expected a P6 color pixmap")
        if shape is None:
            shape = pixels.shape
        elif pixels.shape != shape:
            raise DimensionMismatchError(
                f"{path}: frame is {pixels.shape[1]}x{pixels.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}")
        yield Frame(pixels, _timestamp(i, fps))


def write_frame_dir(directory: str | Path, frames: Iterable[Frame]) -> int:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = 0
    for n, frame in enumerate(frames, 1):
        write_pnm(directory / f"{n:06d}.ppm", frame.pixels)
    return n


def read_sltk_header(fh: IO[bytes], name: str = "<stream>") -> tuple[int, int, int]:
    head = fh.read(SLTK_HEADER.size)
    if len(head) < SLTK_HEADER.size:
        raise MalformedHeaderError(f"{name}: header is {len(head)} bytes, expected 16")
    magic, w, h, fps = SLTK_HEADER.unpack(head)
    if magic != SLTK_MAGIC:
        raise MalformedHeaderError(f"{name}: bad magic {magic!r}, expected {SLTK_MAGIC!r}")
    if w < 3 or h < 3 or fps == 0:
        raise MalformedHeaderError(f"{name}: bad header values width={w} height={h} fps={fps}")
    return w, h, fps


def read_sltk(path: str | Path, fps: float | None = None) -> Iterator[Frame]:
    """Frames from an SLTK stream; ``fps`` overrides the header rate."""
    path = Path(path)
    with path.open("rb") as fh:
        w, h, header_fps = read_sltk_header(fh, str(path))
        rate = fps or header_fps
        size = w * h * 3
        i = 0
        while True:
            offset = SLTK_HEADER.size + i * size
            chunk = fh.read(size)
            if not chunk:
                return
            if len(chunk) < size:
                raise TruncatedFrameError(f"{path}: frame {i} at offset {offset} has "
                                          f"{len(chunk)} of {size} bytes")
            yield Frame(np.frombuffer(chunk, dtype=np.uint8).reshape(h, w, 3), _timestamp(i, rate))
            i += 1


def write_sltk(path: str | Path, frames: Iterable[Frame], fps: int) -> int:
    """Write frames as an SLTK stream; returns the frame count."""
    frames = iter(frames)
    first = next(frames, None)
    if first is None:
        raise ValueError("cannot write an empty stream")
    w, h = first.width, first.height
    n = 0
    with Path(path).open("wb") as fh:
        fh.write(SLTK_HEADER.pack(SLTK_MAGIC, w, h, int(fps)))
        for n, frame in enumerate(itertools.chain([first], frames), 1):
            if (frame.width, frame.height) != (w, h):
                raise DimensionMismatchError(
                    f"frame {n - 1} is {frame.width}x{frame.height}, expected {w}x{h}")
            fh.write(frame.pixels.tobytes())
    return n


@dataclass(frozen=True)
class FrameSource:
    """Where frames come from: ``kind`` is ``"dir"``, ``"raw"`` or ``"scene"``."""

    kind: str
    location: str | Path
    fps: float | None = None

    def __post_init__(self):
        if self.kind not in ("dir", "raw", "scene"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.fps is not None and self.fps <= 0:
            raise ValueError("fps must be > 0")


def read_frames(source: FrameSource) -> Iterator[Frame]:
    if source.kind == "dir":
        return read_frame_dir(source.location, source.fps or 30.0)
    if source.kind == "raw":
        path = Path(source.location)
        if not path.is_file():
            raise FileNotFoundError(f"raw stream not found: {path}")
        return read_sltk(path, source.fps)
    from raytrack.scenes import load_scene, render
    script = load_scene(source.location)
    if source.fps:
        import dataclasses
        script = dataclasses.replace(script, fps=source.fps)
    return (frame for frame, _ in render(script))


_DONE = object()


def prefetch(frames: Iterable[Frame], depth: int = 8) -> Iterator[Frame]:
    """Decode ``frames`` on a worker thread, at most ``depth`` frames ahead.

    Order is preserved and exceptions raised by the producer are re-raised
    in the consumer at the point they occurred.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    q: queue.Queue = queue.Queue(maxsize=depth)
    stop = threading.Event()

    def work():
        try:
            for item in frames:
                while not stop.is_set():
                    try:
                        q.put((item, None), timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
            q.put((_DONE, None))
        except BaseException as exc:  # handed to the consumer
            q.put((_DONE, exc))

    worker = threading.Thread(target=work, daemon=True)
    worker.start()
    try:
        while True:
            item, exc = q.get()
            if item is _DONE:
                if exc is not None:
                    raise exc
                return
            yield item
    finally:
        stop.set()


# -- traces -----------------------------------------------------------------

FIELDS = ("frame", "t_ms", "modes", "movement", "compensation", "centroid", "area",
          "inner", "iters", "x", "y", "z")


def _r(v: float) -> float:
    return round(float(v), 6)


@dataclass(frozen=True)
class TraceRecord:
    frame: int
    t_ms: float
    modes: tuple[str, ...]
    movement: int
    compensation: int
    centroid: tuple[float, float] | None = None
    area: float | None = None
    inner: tuple[int, int] | None = None
    iters: int | None = None
    raw: tuple[float, float, float] | None = None
    smoothed: tuple[float, float, float] | None = None

    @classmethod
    def from_step(cls, index: int, t_ms: float, result: StepResult) -> "TraceRecord":
        est = result.estimate if result.output is not None else None
        return cls(
            frame=index, t_ms=t_ms, modes=tuple(m.value for m in result.modes),
            movement=result.movement, compensation=result.compensation,
            centroid=tuple(map(_r, est.centroid)) if est else None,
            area=_r(est.area) if est else None,
            inner=tuple(int(v) for v in est.inner) if est else None,
            iters=est.iterations if est else None,
            raw=tuple(map(_r, result.raw)) if result.raw is not None else None,
            smoothed=tuple(map(_r, result.output)) if result.output is not None else None,
        )

    def as_dict(self) -> dict:
        x, y, z = self.smoothed if self.smoothed else (None, None, None)
        return {
            "frame": self.frame, "t_ms": _r(self.t_ms), "modes": list(self.modes),
            "movement": self.movement, "compensation": self.compensation,
            "centroid": list(self.centroid) if self.centroid else None,
            "area": self.area, "inner": list(self.inner) if self.inner else None,
            "iters": self.iters, "x": x, "y": y, "z": z,
        }


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    return str(value)


def emit(records: Iterable[TraceRecord], fmt: str, out: IO[str], header: bool = False) -> int:
    """Write exactly one line per record; returns the record count.

    With ``header`` a csv column-name row is written first.
    """
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown trace format {fmt!r}")
    writer = None
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        if header:
            writer.writerow(FIELDS)
    n = 0
    for n, rec in enumerate(records, 1):
        d = rec.as_dict()
        if writer:
            writer.writerow([_cell(d[k]) for k in FIELDS])
        else:
            out.write(json.dumps(d) + "\n")
    return n


def emit_text(records: Iterable[TraceRecord], fmt: str = "jsonl", header: bool = False) -> str:
    buf = io.StringIO()
    emit(records, fmt, buf, header)
    return buf.getvalue()


def track(frames: Iterable[Frame], config=None) -> Iterator[tuple[TraceRecord, StepResult]]:
    """Run a fresh tracker over ``frames``, pairing each step with its trace record."""
    from raytrack.config import Config
    from raytrack.tracker import Tracker

    tracker = Tracker(config or Config())
    for i, frame in enumerate(frames):
        result = tracker.feed(frame)
        yield TraceRecord.from_step(i, frame.timestamp, result), result
