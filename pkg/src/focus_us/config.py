"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` and text after ``#`` are ignored.  List values are
comma separated.  Paths are resolved relative to the config file.

Keys
----
f0, B, Tp, D           pulse carrier, sweep bandwidth, duration, time-bandwidth product.
                       Give two of (B, Tp, D); with only D, B = 0.6 f0.
window, taper          amplitude window ("tukey" or "rect") and taper fraction.
fs                     sample rate; or f_ref with P_sample (fs = P_sample * f_ref).
f_ref                  reference frequency for oversampling factors (default f0).
M, pitch, c            element count, element pitch (m), speed of sound (m/s).
phantom                phantom file (``r_m theta_rad alpha f_shift_hz`` rows).
scatterers             inline phantom rows separated by ``;`` (added to the file).
T, n_samples           acquisition window (s) or samples per element.
noise_rms, seed        additive noise level and its seed.
theta_min, theta_max, n_theta    uniform steering grid (rad).
methods                any of pre, post, focus.
n_q                    truncation lengths for focus (odd).
n1, n2                 explicit asymmetric window for focus (overrides n_q).
band_threshold_db      band selection threshold.
P                      oversampling factors for the complexity report.
complexity_K           K used in the complexity report (default: measured G + N_q - 1).
complexity_N_h         N_h per entry of P (default: D * P).
log_base               "2" or "e".
dynamic_range, pixel_pitch_mm    B-mode display settings.
psf_window_mm          half-width of the axial search window around each scatterer.
lut_cache              LUT cache directory (default: <out>/lut_cache).
"""

import hashlib
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .scene import Phantom, Scatterer, load_phantom


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v):
    out = []
    for x in v.split(","):
        if x.strip():
            f = float(x)
            if f != int(f):
                raise ValueError(f"{x!r} is not an integer")
            out.append(int(f))
    return tuple(out)


def _strs(v):
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _int(v):
    return _ints(v)[0]


SCHEMA = {
    "f0": float,
    "B": float,
    "Tp": float,
    "D": float,
    "window": str,
    "taper": float,
    "fs": float,
    "f_ref": float,
    "P_sample": float,
    "M": _int,
    "pitch": float,
    "c": float,
    "phantom": str,
    "scatterers": str,
    "T": float,
    "n_samples": _int,
    "noise_rms": float,
    "seed": _int,
    "theta_min": float,
    "theta_max": float,
    "n_theta": _int,
    "methods": _strs,
    "n_q": _ints,
    "n1": _int,
    "n2": _int,
    "band_threshold_db": float,
    "P": _floats,
    "complexity_K": _int,
    "complexity_N_h": _ints,
    "log_base": str,
    "dynamic_range": float,
    "pixel_pitch_mm": float,
    "psf_window_mm": float,
    "lut_cache": str,
}
METHODS = ("pre", "post", "focus")


@dataclass(frozen=True)
class ExperimentConfig:
    f0: float
    B: float
    Tp: float
    fs: float
    f_ref: float
    M: int
    pitch: float
    phantom: Phantom
    n_samples: int
    thetas: np.ndarray = field(repr=False)
    methods: tuple = ("pre", "post", "focus")
    n_q: tuple = (3, 9, 15, 21, 29)
    n1: Optional[int] = None
    n2: Optional[int] = None
    window: str = "tukey"
    taper: float = 0.1
    c: float = 1540.0
    noise_rms: float = 0.0
    seed: int = 0
    band_threshold_db: float = 40.0
    P: tuple = ()
    complexity_K: Optional[int] = None
    complexity_N_h: tuple = ()
    log_base: str = "2"
    dynamic_range: float = 60.0
    pixel_pitch_mm: float = 0.2
    psf_window_mm: float = 2.0
    lut_cache: Optional[str] = None
    digest: str = ""

    @property
    def D(self):
        return self.B * self.Tp

    @property
    def T(self):
        return self.n_samples / self.fs

    def windows(self):
        """``(label, n1, n2)`` for every FoCUS truncation window requested."""
        if self.n1 is not None:
            return [(self.n1 + self.n2 + 1, self.n1, self.n2)]
        return [(nq, (nq - 1) // 2, (nq - 1) // 2) for nq in self.n_q]


def read_pairs(path):
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                pairs[key] = SCHEMA[key](value)
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return pairs


def _require(pairs, key):
    if key not in pairs:
        raise ConfigError(f"missing required key {key!r}")
    return pairs[key]


def load_config(path):
    """Parse and validate a config file into an :class:`ExperimentConfig`."""
    try:
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    pairs = read_pairs(path)
    base = os.path.dirname(os.path.abspath(path))

    f0 = _require(pairs, "f0")
    B, Tp, D = pairs.get("B"), pairs.get("Tp"), pairs.get("D")
    given = sum(v is not None for v in (B, Tp, D))
    if given == 1 and D is not None:
        B = 0.6 * f0
        Tp = D / B
    elif given == 2:
        if B is None:
            B = D / Tp
        elif Tp is None:
            Tp = D / B
    else:
        raise ConfigError("give D alone or exactly two of B, Tp, D")

    f_ref = pairs.get("f_ref", f0)
    if "fs" in pairs:
        fs = pairs["fs"]
    elif "P_sample" in pairs:
        fs = pairs["P_sample"] * f_ref
    else:
        raise ConfigError("give fs or P_sample")

    if "n_samples" in pairs:
        n_samples = pairs["n_samples"]
    else:
        n_samples = int(round(_require(pairs, "T") * fs))

    rows = []
    if "phantom" in pairs:
        ppath = os.path.join(base, pairs["phantom"])
        if not os.path.exists(ppath):
            raise ConfigError(f"phantom file not found: {ppath}")
        rows.extend(load_phantom(ppath).scatterers)
    for chunk in pairs.get("scatterers", "").split(";"):
        if chunk.strip():
            parts = chunk.split()
            if len(parts) != 4:
                raise ConfigError(f"inline scatterer needs 4 numbers, got {chunk!r}")
            rows.append(Scatterer(*map(float, parts)))
    phantom = Phantom(tuple(rows))

    n_theta = pairs.get("n_theta", 1)
    thetas = np.linspace(pairs.get("theta_min", 0.0), pairs.get("theta_max", 0.0), n_theta)

    methods = pairs.get("methods", METHODS)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    n_q = pairs.get("n_q", (3, 9, 15, 21, 29))
    n1, n2 = pairs.get("n1"), pairs.get("n2")
    if (n1 is None) != (n2 is None):
        raise ConfigError("n1 and n2 must be given together")
    if n1 is None and any(q < 1 or q % 2 == 0 for q in n_q):
        raise ConfigError(f"n_q values must be odd for symmetric truncation, got {n_q}")
    P = pairs.get("P", ())
    nh = pairs.get("complexity_N_h", ())
    if nh and len(nh) != len(P):
        raise ConfigError("complexity_N_h needs one entry per P")
    log_base = pairs.get("log_base", "2")
    if log_base not in ("2", "e"):
        raise ConfigError(f"log_base must be 2 or e, got {log_base!r}")
    window = pairs.get("window", "tukey")
    if window not in ("tukey", "rect"):
        raise ConfigError(f"window must be tukey or rect, got {window!r}")

    cache = pairs.get("lut_cache")
    return ExperimentConfig(
        f0=f0,
        B=B,
        Tp=Tp,
        fs=fs,
        f_ref=f_ref,
        M=pairs.get("M", 64),
        pitch=pairs.get("pitch", 0.3e-3),
        phantom=phantom,
        n_samples=n_samples,
        thetas=thetas,
        methods=tuple(methods),
        n_q=tuple(n_q),
        n1=n1,
        n2=n2,
        window=window,
        taper=pairs.get("taper", 0.1),
        c=pairs.get("c", 1540.0),
        noise_rms=pairs.get("noise_rms", 0.0),
        seed=pairs.get("seed", 0),
        band_threshold_db=pairs.get("band_threshold_db", 40.0),
        P=tuple(P),
        complexity_K=pairs.get("complexity_K"),
        complexity_N_h=tuple(nh),
        log_base=log_base,
        dynamic_range=pairs.get("dynamic_range", 60.0),
        pixel_pitch_mm=pairs.get("pixel_pitch_mm", 0.2),
        psf_window_mm=pairs.get("psf_window_mm", 2.0),
        lut_cache=None if cache is None else os.path.join(base, cache),
        digest=digest,
    )
