"""Binary containers for channel frames, beam lines and Q tables.

Frame / beam-line container (little endian)::

    offset  size  field
    0       8     magic  b"FOCUSFRM"
    8       4     uint32 rows (M; 1 for a beam line)
    12      4     uint32 columns (N_s)
    16      8     float64 fs
    24      8     float64 T
    32      8     float64 theta (0 for channel frames)
    40      1     uint8 tag code (0 = channel frame, 1.. = beam line tags)
    41      23    zero padding
    64      ...   float32 samples, row-major (element-major)

Q table file::

    0       8     magic  b"FOCUSQTB"
    8       4     uint32 format version
    12      4     uint32 M
    16      4     uint32 number of band indices
    20      4     uint32 N1
    24      4     uint32 N2
    28      4     uint32 grid length
    32      8     int64 first band index
    40      8     float64 theta
    48      8     float64 T (grid period, s)
    56      8     float64 fs
    64      4     uint32 acquired samples N_s
    68      1     uint8 matched filter integrated
    69      3     zero padding
    72      32    SHA-256 fingerprint
    104     ...   complex64 entries in (k, m, n) order
"""

import struct

import numpy as np

from .exceptions import InvalidInputError, StaleLUTError
from .fdbf import LUT_VERSION, QTable, lut_fingerprint
from .scene import ChannelFrame
from .tdbf import TAGS, BeamLine

FRAME_MAGIC = b"FOCUSFRM"
QTABLE_MAGIC = b"FOCUSQTB"
_FRAME_HEADER = struct.Struct("<8sIIdddB23x")
_QTABLE_HEADER = struct.Struct("<8sIIIIIIqdddIB3x32s")
assert _FRAME_HEADER.size == 64


def _write_container(path, data, fs, T, theta, tag_code):
    data = np.atleast_2d(np.asarray(data))
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(_FRAME_HEADER.pack(FRAME_MAGIC, rows, cols, fs, T, theta, tag_code))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_container(path):
    with open(path, "rb") as fh:
        head = fh.read(_FRAME_HEADER.size)
        if len(head) != _FRAME_HEADER.size:
            raise InvalidInputError(f"{path}: truncated header")
        magic, rows, cols, fs, T, theta, tag_code = _FRAME_HEADER.unpack(head)
        if magic != FRAME_MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    if len(body) != rows * cols * 4:
        raise InvalidInputError(f"{path}: expected {rows * cols} samples, found {len(body) // 4}")
    data = np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)
    return data, fs, T, theta, tag_code


def save_frame(frame, path):
    """Persist a :class:`ChannelFrame` (samples stored as float32)."""
    _write_container(path, frame.data, frame.fs, frame.T, 0.0, 0)


def load_frame(path, geometry=None, pulse=None):
    data, fs, T, _, tag_code = _read_container(path)
    if tag_code != 0:
        raise InvalidInputError(f"{path}: file holds a beam line, not a channel frame")
    return ChannelFrame(data=data, fs=fs, T=T, geometry=geometry, pulse=pulse)


def save_beam_line(line, path):
    """Persist a :class:`BeamLine` as a one-row container carrying its tag and angle."""
    samples = np.real(line.samples)
    _write_container(path, samples, line.fs, samples.size / line.fs, line.theta, TAGS.index(line.tag) + 1)


def load_beam_line(path):
    data, fs, _, theta, tag_code = _read_container(path)
    if not 1 <= tag_code <= len(TAGS) or data.shape[0] != 1:
        raise InvalidInputError(f"{path}: file does not hold a beam line")
    return BeamLine(theta=theta, samples=data[0], fs=fs, tag=TAGS[tag_code - 1])


def save_q_table(q, path):
    """Write a :class:`QTable` with its fingerprint; entries are complex64."""
    K, M, n_q = q.entries.shape
    head = _QTABLE_HEADER.pack(
        QTABLE_MAGIC,
        LUT_VERSION,
        M,
        K,
        q.n1,
        q.n2,
        q.n_grid,
        int(q.band[0]),
        q.theta,
        q.n_grid / q.fs,
        q.fs,
        q.n_samples,
        int(q.mf_integrated),
        bytes.fromhex(q.fingerprint),
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(q.entries, dtype="<c8").tobytes())


def read_q_header(path):
    """Header fields of a Q table file as a dict (entries are not read)."""
    with open(path, "rb") as fh:
        head = fh.read(_QTABLE_HEADER.size)
    if len(head) != _QTABLE_HEADER.size:
        raise InvalidInputError(f"{path}: truncated Q table header")
    fields = _QTABLE_HEADER.unpack(head)
    if fields[0] != QTABLE_MAGIC:
        raise InvalidInputError(f"{path}: bad magic {fields[0]!r}")
    keys = ("magic", "version", "M", "K", "n1", "n2", "n_grid", "band_start", "theta", "T", "fs", "n_samples", "mf_integrated", "fingerprint")
    out = dict(zip(keys, fields))
    out["fingerprint"] = out["fingerprint"].hex()
    out["mf_integrated"] = bool(out["mf_integrated"])
    return out


def load_q_table(path, geometry=None):
    """Read a Q table; with ``geometry`` given, the stored fingerprint is re-verified."""
    h = read_q_header(path)
    if h["version"] != LUT_VERSION:
        raise StaleLUTError(f"{path}: format version {h['version']} != {LUT_VERSION}")
    with open(path, "rb") as fh:
        fh.seek(_QTABLE_HEADER.size)
        body = fh.read()
    count = h["K"] * h["M"] * (h["n1"] + h["n2"] + 1)
    if len(body) != count * 8:
        raise InvalidInputError(f"{path}: expected {count} entries, found {len(body) // 8}")
    entries = np.frombuffer(body, dtype="<c8").reshape(h["K"], h["M"], h["n1"] + h["n2"] + 1).copy()
    band = np.arange(h["band_start"], h["band_start"] + h["K"])
    if geometry is not None:
        fp = lut_fingerprint(geometry, h["theta"], band, h["n1"], h["n2"], h["n_grid"], h["fs"], h["n_samples"])
        if fp != h["fingerprint"]:
            raise StaleLUTError(f"{path}: fingerprint does not match the given geometry")
    return QTable(
        theta=h["theta"],
        n1=h["n1"],
        n2=h["n2"],
        band=band,
        n_grid=h["n_grid"],
        fs=h["fs"],
        n_samples=h["n_samples"],
        entries=entries,
        mf_integrated=h["mf_integrated"],
        fingerprint=h["fingerprint"],
    )
