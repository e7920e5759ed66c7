import csv
import io
import json
import struct
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from raytrack.config import Config, ConfigError, load_config, parse_config_text
from raytrack.pixels import Frame
from raytrack.scenes import SceneScript, dump_scene, render
from raytrack.streams import (
    FIELDS,
    DimensionMismatchError,
    FormatError,
    FrameSource,
    MalformedHeaderError,
    TraceRecord,
    TruncatedFrameError,
    UnsupportedMaxvalError,
    decode_pnm,
    emit,
    emit_text,
    encode_pnm,
    prefetch,
    read_frame_dir,
    read_frames,
    read_pnm,
    read_sltk,
    track,
    write_frame_dir,
    write_pnm,
    write_sltk,
)


def frames_of(n, w=6, h=4, seed=0):
    rng = np.random.default_rng(seed)
    return [Frame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8), i * 10.0) for i in range(n)]


# -- pixmaps ------------------------------------------------------------------------

@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3))))
def test_p6_round_trip(pixels):
    assert np.array_equal(decode_pnm(encode_pnm(pixels)), pixels)


@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_p5_round_trip(pixels):
    assert np.array_equal(decode_pnm(encode_pnm(pixels)), pixels)


def test_header_comments_and_whitespace():
    data = b"P6 # made by hand\n# another\n2\t1\n255\n" + bytes(range(6))
    assert decode_pnm(data).tolist() == [[[0, 1, 2], [3, 4, 5]]]


def test_maxval_65535_rejected():
    data = b"P6\n2 2\n65535\n" + bytes(24)
    with pytest.raises(UnsupportedMaxvalError, match="65535"):
        decode_pnm(data, "deep.ppm")


@pytest.mark.parametrize("data,err", [
    (b"P3\n1 1\n255\n0 0 0", MalformedHeaderError),
    (b"P6\n1\n", MalformedHeaderError),
    (b"P6\nx 1\n255\n", MalformedHeaderError),
    (b"P6\n0 1\n255\n", MalformedHeaderError),
    (b"P6\n2 2\n255\n" + bytes(5), TruncatedFrameError),
])
def test_malformed_pixmaps(data, err):
    with pytest.raises(err, match="bad.ppm"):
        decode_pnm(data, "bad.ppm")


def test_encode_rejects_odd_shapes():
    with pytest.raises(ValueError):
        encode_pnm(np.zeros((2, 2, 4), np.uint8))


def test_read_pnm_names_file(tmp_path):
    p = tmp_path / "x.ppm"
    p.write_bytes(b"P6\n2 2\n255\n")
    with pytest.raises(TruncatedFrameError, match="x.ppm"):
        read_pnm(p)


# -- frame directories ----------------------------------------------------------------

def test_directory_of_ten(tmp_path):
    frames = frames_of(10)
    assert write_frame_dir(tmp_path, frames) == 10
    assert sorted(p.name for p in tmp_path.iterdir())[0] == "000001.ppm"
    got = list(read_frame_dir(tmp_path, fps=20))
    assert [f.timestamp for f in got] == [i * 50.0 for i in range(10)]
    assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(frames, got))


def test_directory_numeric_order(tmp_path):
    frames = frames_of(3)
    for name, f in zip(("f2.ppm", "f10.ppm", "f1.ppm"), frames):
        write_pnm(tmp_path / name, f.pixels)
    (tmp_path / "notes.txt").write_text("ignored")
    got = list(read_frame_dir(tmp_path))
    assert [np.array_equal(g.pixels, frames[i].pixels) for g, i in zip(got, (2, 0, 1))] == [True] * 3


def test_directory_dimension_mismatch(tmp_path):
    write_pnm(tmp_path / "1.ppm", np.zeros((4, 6, 3), np.uint8))
    write_pnm(tmp_path / "2.ppm", np.zeros((4, 5, 3), np.uint8))
    with pytest.raises(DimensionMismatchError, match="2.ppm"):
        list(read_frame_dir(tmp_path))


def test_directory_rejects_gray(tmp_path):
    write_pnm(tmp_path / "1.ppm", np.zeros((4, 6), np.uint8))
    with pytest.raises(MalformedHeaderError, match="1.ppm"):
        list(read_frame_dir(tmp_path))


def test_directory_missing(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope"):
        list(read_frame_dir(tmp_path / "nope"))


# -- SLTK streams -----------------------------------------------------------------------

def test_sltk_header_layout(tmp_path):
    p = tmp_path / "s.sltk"
    write_sltk(p, frames_of(2), 30)
    data = p.read_bytes()
    assert data[:16] == b"SLTK" + struct.pack("<III", 6, 4, 30)
    assert len(data) == 16 + 2 * 72


@pytest.mark.parametrize("k", [0, 1, 3])
def test_sltk_frame_count(tmp_path, k):
    p = tmp_path / "s.sltk"
    p.write_bytes(b"SLTK" + struct.pack("<III", 320, 240, 30) + bytes(230_400 * k))
    got = list(read_sltk(p))
    assert len(got) == k
    assert [f.timestamp for f in got] == [i * 1000 / 30 for i in range(k)]


def test_sltk_round_trip_and_fps_override(tmp_path):
    frames = frames_of(5)
    p = tmp_path / "s.sltk"
    assert write_sltk(p, frames, 25) == 5
    got = list(read_sltk(p))
    assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(frames, got))
    assert got[1].timestamp == 40.0
    assert list(read_sltk(p, fps=10))[1].timestamp == 100.0


def test_sltk_truncated_names_offset(tmp_path):
    p = tmp_path / "s.sltk"
    write_sltk(p, frames_of(2), 30)
    p.write_bytes(p.read_bytes()[:-10])
    with pytest.raises(TruncatedFrameError, match=r"frame 1 at offset 88"):
        list(read_sltk(p))


@pytest.mark.parametrize("head", [
    b"SLT", b"XXXX" + struct.pack("<III", 3, 3, 30), b"SLTK" + struct.pack("<III", 3, 3, 0),
    b"SLTK" + struct.pack("<III", 2, 3, 30),
])
def test_sltk_bad_header(tmp_path, head):
    p = tmp_path / "s.sltk"
    p.write_bytes(head)
    with pytest.raises(MalformedHeaderError, match="s.sltk"):
        list(read_sltk(p))


def test_write_sltk_rejects_mixed_sizes(tmp_path):
    frames = frames_of(1) + frames_of(1, w=5)
    with pytest.raises(DimensionMismatchError):
        write_sltk(tmp_path / "s.sltk", frames, 30)
    with pytest.raises(ValueError):
        write_sltk(tmp_path / "e.sltk", [], 30)


def test_format_errors_share_a_base():
    for err in (MalformedHeaderError, UnsupportedMaxvalError, DimensionMismatchError,
                TruncatedFrameError):
        assert issubclass(err, FormatError)


# -- sources ---------------------------------------------------------------------------

def test_synth_round_trip_through_sources(tmp_path):
    script = SceneScript(duration=4, fps=20, noise=3, seed=2, path=((0, 40.0, 60.0, 10.0),
                                                                    (3, 60.0, 60.0, 10.0)))
    frames = [f for f, _ in render(script)]
    write_sltk(tmp_path / "s.sltk", frames, 20)
    write_frame_dir(tmp_path / "d", frames)
    (tmp_path / "s.scene").write_text(dump_scene(script))
    for src in (FrameSource("raw", tmp_path / "s.sltk"), FrameSource("dir", tmp_path / "d", 20),
                FrameSource("scene", tmp_path / "s.scene")):
        got = list(read_frames(src))
        assert len(got) == 4
        for a, b in zip(frames, got):
            assert np.array_equal(a.pixels, b.pixels) and a.timestamp == b.timestamp


def test_missing_raw_names_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing.sltk"):
        read_frames(FrameSource("raw", tmp_path / "missing.sltk"))


def test_source_validation():
    with pytest.raises(ValueError):
        FrameSource("camera", "x")
    with pytest.raises(ValueError):
        FrameSource("dir", "x", fps=0)


# -- prefetch ---------------------------------------------------------------------------

@given(st.integers(0, 60), st.integers(1, 5))
def test_prefetch_preserves_order(n, depth):
    assert list(prefetch(iter(range(n)), depth)) == list(range(n))


def test_prefetch_reraises():
    def gen():
        yield 1
        yield 2
        raise TruncatedFrameError("boom")

    it = prefetch(gen(), 1)
    assert next(it) == 1 and next(it) == 2
    with pytest.raises(TruncatedFrameError, match="boom"):
        next(it)


def test_prefetch_is_bounded():
    produced = []

    def gen():
        for i in range(100):
            produced.append(i)
            yield i

    it = prefetch(gen(), 3)
    assert next(it) == 0
    time.sleep(0.3)
    # one taken, three queued, one blocked in put
    assert len(produced) <= 5
    it.close()


def test_prefetch_depth_validated():
    with pytest.raises(ValueError):
        list(prefetch([], 0))


# -- traces ------------------------------------------------------------------------------

SEARCH = TraceRecord(3, 100.0, ("SEARCHING",), 12, 4)
TRACK = TraceRecord(4, 133.333333, ("TRACKING",), 70_000, 9, (80.5, 60.25), 1200.0, (80, 60), 3,
                    (80.5, 60.25, 0.0), (80.0, 60.0, 0.5))


def test_jsonl_searching_record():
    d = json.loads(emit_text([SEARCH]))
    assert list(d) == list(FIELDS)
    assert d["modes"] == ["SEARCHING"]
    for k in ("centroid", "area", "inner", "iters", "x", "y", "z"):
        assert d[k] is None


def test_jsonl_tracking_record():
    d = json.loads(emit_text([TRACK]))
    assert d["centroid"] == [80.5, 60.25] and d["inner"] == [80, 60] and d["iters"] == 3
    assert (d["x"], d["y"], d["z"]) == (80.0, 60.0, 0.5)
    assert isinstance(d["z"], float)


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
def test_one_line_per_record(fmt):
    recs = [SEARCH, TRACK] * 50
    out = io.StringIO()
    assert emit(recs, fmt, out) == 100
    assert out.getvalue().count("\n") == 100


def test_csv_layout():
    text = emit_text([SEARCH, TRACK], "csv", header=True)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == list(FIELDS)
    assert rows[1] == ["3", "100.0", "SEARCHING", "12", "4", "", "", "", "", "", "", ""]
    assert rows[2][5] == "80.5 60.25" and rows[2][7] == "80 60" and rows[2][-1] == "0.5"


def test_unknown_format():
    with pytest.raises(ValueError):
        emit([], "xml", io.StringIO())


def test_track_records_match_results():
    script = SceneScript(duration=5, path=((0, 80.0, 60.0, 20.0),))
    pairs = list(track(f for f, _ in render(script)))
    assert [r.frame for r, _ in pairs] == list(range(5))
    assert all(r.modes == tuple(m.value for m in res.modes) for r, res in pairs)


# -- configuration ------------------------------------------------------------------------

DEFAULTS = """blur_radius = 5
target_width = 160
target_height = 120
edge_threshold = 128
distinct_values = 10
compensation_cap = 64
n = 16
y = 2
m = 8
max_iterations = 10
epsilon = 1
ray_budget = 65536
acquire_threshold = 57600
idle_threshold = 4800
idle_timeout_ms = 2000
init_delay_ms = 2000
max_area_fraction = 0.6
min_area_fraction = 0.02
color_window = 5
color_threshold = 90
recovery_offsets = 10,20
smoothing = 0.9
"""


def test_default_dump():
    assert Config().dump() == DEFAULTS


def test_dump_reloads(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text(DEFAULTS)
    assert load_config(p) == Config()


def test_load_overrides(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("# tuned\nn = 32\nsmoothing = 0.5   # faster\nrecovery_offsets = {5, 15}\n")
    cfg = load_config(p)
    assert cfg.estimator.n == 32 and cfg.tracker.smoothing == 0.5
    assert cfg.tracker.recovery_offsets == (5, 15)
    assert cfg.pipeline == Config().pipeline


def test_with_overrides_coerces():
    cfg = Config().with_overrides({"acquire_threshold": "60_000", "m": 4})
    assert cfg.tracker.acquire_threshold == 60_000 and cfg.estimator.m == 4


@pytest.mark.parametrize("overrides", [{"nope": "1"}, {"n": "many"}, {"smoothing": "1.5"}])
def test_bad_overrides(overrides):
    with pytest.raises(ConfigError):
        Config().with_overrides(overrides)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.conf")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("n = 1\njunk\n")
