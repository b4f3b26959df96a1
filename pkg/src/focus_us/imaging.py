"""Envelope detection, log compression and sector scan conversion."""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.signal import hilbert

from .exceptions import InvalidInputError, InvalidParameterError
from .scene import SPEED_OF_SOUND
from .validation import check_positive, check_sorted

INTERPOLATION = {"bilinear": 1, "nearest": 0}


def envelope(line):
    """Magnitude of the analytic signal of a :class:`BeamLine` or a real array.

    For a 2-D array the envelope is taken along the last axis.
    """
    x = line.samples if hasattr(line, "samples") else line
    x = np.real(np.asarray(x, dtype=np.complex128 if np.iscomplexobj(x) else np.float64))
    return np.abs(hilbert(x, axis=-1))


def log_compress(env, ref, dynamic_range):
    """``20 log10(env / ref)`` clipped to ``[-dynamic_range, 0]``."""
    db = 20.0 * np.log10(np.maximum(np.asarray(env, dtype=np.float64), 1e-300) / ref)
    return np.clip(db, -dynamic_range, 0.0)


@dataclass(frozen=True)
class BModeImage:
    """Scan-converted sector image in dB.

    ``pixels[i, j]`` is the value at depth ``z_mm[i]`` and lateral position
    ``x_mm[j]``; every value lies in ``[-dynamic_range, 0]``.
    """

    pixels: np.ndarray = field(repr=False)
    dynamic_range: float
    x_mm: np.ndarray = field(repr=False)
    z_mm: np.ndarray = field(repr=False)
    pitch_mm: float
    sector: tuple

    @property
    def shape(self):
        return self.pixels.shape


def scan_convert(lines, dynamic_range=60.0, pitch_mm=0.2, c=SPEED_OF_SOUND, ref=None, method="bilinear"):
    """Map a fan of beam lines onto a Cartesian pixel grid.

    Parameters
    ----------
    lines : sequence of BeamLine
        At least two lines, sorted by strictly increasing ``theta`` and
        sharing the same length and sample rate.
    dynamic_range : float
        Displayed range in dB.
    pitch_mm : float
        Pixel spacing in both directions.
    c : float
        Speed of sound; beam time ``t`` maps to range ``c t / 2``.
    ref : float, optional
        Envelope value mapped to 0 dB.  Defaults to the largest envelope
        value; pass a fixed value to compare images on a common scale.
    method : {"bilinear", "nearest"}
        Interpolation in the (range, angle) sample grid.

    Returns
    -------
    BModeImage
    """
    if len(lines) < 2:
        raise InvalidInputError("scan conversion needs at least two lines")
    if method not in INTERPOLATION:
        raise InvalidParameterError(f"method must be one of {tuple(INTERPOLATION)}, got {method!r}")
    check_positive("dynamic_range", dynamic_range)
    check_positive("pitch_mm", pitch_mm)
    thetas = check_sorted("theta grid", [ln.theta for ln in lines])
    n = {ln.n_samples for ln in lines}
    fs = {ln.fs for ln in lines}
    if len(n) != 1 or len(fs) != 1:
        raise InvalidInputError("all lines must share length and sample rate")
    n, fs = n.pop(), fs.pop()

    env = envelope(np.stack([ln.samples for ln in lines]))
    if ref is None:
        ref = env.max() if env.max() > 0 else 1.0

    dr_mm = 1e3 * c / (2 * fs)
    r_max = (n - 1) * dr_mm
    x_lo, x_hi = r_max * np.sin(min(thetas[0], 0)), r_max * np.sin(max(thetas[-1], 0))
    x_mm = np.arange(np.floor(x_lo / pitch_mm), np.floor(x_hi / pitch_mm) + 1) * pitch_mm
    z_mm = np.arange(0, np.floor(r_max / pitch_mm) + 1) * pitch_mm
    X, Z = np.meshgrid(x_mm, z_mm)
    R = np.hypot(X, Z)
    TH = np.arctan2(X, Z)
    inside = (R <= r_max) & (TH >= thetas[0]) & (TH <= thetas[-1])
    ri = R / dr_mm
    ti = np.interp(TH, thetas, np.arange(thetas.size))
    # interpolate amplitude, not dB, so zero-valued lines stay finite
    vals = map_coordinates(env, [ti.ravel(), ri.ravel()], order=INTERPOLATION[method], mode="nearest")
    pixels = np.where(inside, log_compress(vals.reshape(R.shape), ref, dynamic_range), -dynamic_range)
    return BModeImage(
        pixels=pixels,
        dynamic_range=float(dynamic_range),
        x_mm=x_mm,
        z_mm=z_mm,
        pitch_mm=float(pitch_mm),
        sector=(float(thetas[0]), float(thetas[-1])),
    )


def to_gray(image):
    """8-bit levels: ``-dynamic_range`` dB maps to 0 and 0 dB to 255."""
    scaled = (image.pixels + image.dynamic_range) / image.dynamic_range * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def write_pgm(image, path):
    """Write a binary (P5) 8-bit portable graymap, first row = shallowest depth."""
    gray = to_gray(image)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path):
    """Read a P5 graymap with maxval 255 (as written by :func:`write_pgm`)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise InvalidInputError(f"{path}: not an 8-bit P5 graymap")
    w, h = int(tokens[1]), int(tokens[2])
    data = np.frombuffer(raw[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    return data.reshape(h, w)


def write_image_csv(image, path):
    """Dump the raw dB pixels, one image row per line."""
    np.savetxt(path, image.pixels, fmt="%.6f", delimiter=",")
