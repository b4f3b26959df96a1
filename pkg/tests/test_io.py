import struct

import numpy as np
import pytest

from focus_us.exceptions import InvalidInputError, StaleLUTError
from focus_us.fdbf import build_q_table
from focus_us.io import load_beam_line, load_frame, load_q_table, read_q_header, save_beam_line, save_frame, save_q_table
from focus_us.scene import ChannelFrame, uniform_linear_array
from focus_us.tdbf import BeamLine

FS = 11.6e6


def test_frame_roundtrip_float32(tmp_path, rng):
    data = rng.standard_normal((4, 100))
    save_frame(ChannelFrame(data=data, fs=FS, T=100 / FS), tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw[:8] == b"FOCUSFRM" and len(raw) == 64 + 4 * 100 * 4
    assert struct.unpack_from("<II", raw, 8) == (4, 100)
    back = load_frame(tmp_path / "f.bin")
    np.testing.assert_array_equal(back.data, data.astype(np.float32))
    assert back.fs == FS and back.T == 100 / FS


def test_beam_line_roundtrip(tmp_path, rng):
    line = BeamLine(theta=-0.25, samples=rng.standard_normal(50), fs=FS, tag="focus")
    save_beam_line(line, tmp_path / "l.bin")
    back = load_beam_line(tmp_path / "l.bin")
    assert (back.theta, back.tag, back.fs) == (-0.25, "focus", FS)
    np.testing.assert_array_equal(back.samples, line.samples.astype(np.float32))
    with pytest.raises(InvalidInputError):
        load_frame(tmp_path / "l.bin")


def test_frame_is_not_a_beam_line(tmp_path):
    save_frame(ChannelFrame(data=np.zeros((2, 3)), fs=FS, T=3 / FS), tmp_path / "f.bin")
    with pytest.raises(InvalidInputError):
        load_beam_line(tmp_path / "f.bin")


def test_bad_magic_and_truncation(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOTFOCUS" + bytes(56))
    with pytest.raises(InvalidInputError, match="magic"):
        load_frame(tmp_path / "x.bin")
    (tmp_path / "y.bin").write_bytes(b"FOCUSFRM")
    with pytest.raises(InvalidInputError):
        load_frame(tmp_path / "y.bin")
    save_frame(ChannelFrame(data=np.zeros((2, 3)), fs=FS, T=3 / FS), tmp_path / "z.bin")
    (tmp_path / "z.bin").write_bytes((tmp_path / "z.bin").read_bytes()[:-4])
    with pytest.raises(InvalidInputError):
        load_frame(tmp_path / "z.bin")


@pytest.fixture
def table():
    g = uniform_linear_array(4, 0.3e-3)
    return g, build_q_table(g, 0.1, np.arange(30, 40), 2, 3, 256, FS, 200)


def test_q_table_roundtrip(tmp_path, table):
    g, q = table
    save_q_table(q, tmp_path / "q.qtb")
    back = load_q_table(tmp_path / "q.qtb", g)
    np.testing.assert_array_equal(back.entries, q.entries)
    np.testing.assert_array_equal(back.band, q.band)
    assert (back.theta, back.n1, back.n2, back.n_grid, back.fs, back.n_samples) == (0.1, 2, 3, 256, FS, 200)
    assert back.fingerprint == q.fingerprint and not back.mf_integrated
    h = read_q_header(tmp_path / "q.qtb")
    assert h["T"] == pytest.approx(256 / FS) and h["K"] == 10 and h["M"] == 4


def test_q_table_wrong_geometry_is_stale(tmp_path, table):
    _, q = table
    save_q_table(q, tmp_path / "q.qtb")
    with pytest.raises(StaleLUTError):
        load_q_table(tmp_path / "q.qtb", uniform_linear_array(4, 0.31e-3))


def test_q_table_version_and_magic(tmp_path, table):
    _, q = table
    save_q_table(q, tmp_path / "q.qtb")
    raw = bytearray((tmp_path / "q.qtb").read_bytes())
    raw[8:12] = struct.pack("<I", 99)
    (tmp_path / "v.qtb").write_bytes(bytes(raw))
    with pytest.raises(StaleLUTError):
        load_q_table(tmp_path / "v.qtb")
    raw[:8] = b"FOCUSFRM"
    (tmp_path / "m.qtb").write_bytes(bytes(raw))
    with pytest.raises(InvalidInputError):
        load_q_table(tmp_path / "m.qtb")
