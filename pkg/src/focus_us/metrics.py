"""Point-spread-function metrology and multiplication-count models."""

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidParameterError, MeasurementError
from .imaging import envelope
from .scene import SPEED_OF_SOUND
from .validation import check_sorted
from .waveform import half_power_width

LOG_BASES = {"2": 2.0, "e": math.e}


@dataclass(frozen=True)
class PsfReport:
    """Resolution figures for one reflector.

    Sidelobe levels are relative to the main-lobe peak (so they are <= 0 dB).
    Fields that were not measured are ``None``.
    """

    method: str = ""
    depth_mm: Optional[float] = None
    axial_width_s: Optional[float] = None
    axial_width_mm: Optional[float] = None
    lateral_width_rad: Optional[float] = None
    lateral_width_mm: Optional[float] = None
    peak_sidelobe_db: Optional[float] = None
    first_sidelobe_db: Optional[float] = None
    n_q: Optional[int] = None
    P: Optional[float] = None

    def __post_init__(self):
        for name in ("axial_width_s", "axial_width_mm", "lateral_width_rad", "lateral_width_mm"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise MeasurementError(f"{name} must be positive, got {v}")

    def merge(self, other):
        """Combine two fragments; fields set in ``other`` win."""
        mine = asdict(self)
        mine.update({k: v for k, v in asdict(other).items() if v is not None and v != ""})
        return PsfReport(**mine)


def _first_nulls(env, i):
    left = i
    while left > 0 and env[left - 1] <= env[left]:
        left -= 1
    right = i
    while right < env.size - 1 and env[right + 1] <= env[right]:
        right += 1
    return left, right


def _next_peak(env, start, step):
    j = start
    while 0 <= j + step < env.size and env[j + step] >= env[j]:
        j += step
    return j


def measure_axial_psf(line, c=SPEED_OF_SOUND, window=None, noise_floor=0.0, method=None):
    """Axial main-lobe width and sidelobe levels of a single dominant reflector.

    Parameters
    ----------
    line : BeamLine or ndarray
        Beamformed line.  Arrays need ``fs`` via a BeamLine wrapper, so bare
        arrays are measured in samples (``fs = 1``).
    c : float
        Speed of sound used to convert the width to range.
    window : tuple of int, optional
        ``(start, stop)`` sample range to search; other samples are ignored.
    noise_floor : float
        The envelope peak must exceed this value.

    Returns
    -------
    PsfReport
        With ``axial_width_s``, ``axial_width_mm``, ``peak_sidelobe_db``,
        ``first_sidelobe_db`` and ``depth_mm`` filled in.
    """
    fs = getattr(line, "fs", 1.0)
    env = envelope(line)
    lo, hi = (0, env.size) if window is None else (max(0, window[0]), min(env.size, window[1]))
    env = env[lo:hi]
    if env.size < 3 or not np.all(np.isfinite(env)):
        raise MeasurementError("line segment is too short or not finite")
    i = int(np.argmax(env))
    peak = env[i]
    if not peak > noise_floor:
        raise MeasurementError(f"no peak above the noise floor ({noise_floor})")
    t = (lo + np.arange(env.size)) / fs
    width = half_power_width(t, env)
    left, right = _first_nulls(env, i)
    outside = np.concatenate([env[:left], env[right + 1 :]])
    peak_sl = 20 * np.log10(outside.max() / peak) if outside.size and outside.max() > 0 else None
    firsts = []
    if left > 0:
        firsts.append(env[_next_peak(env, left, -1)])
    if right < env.size - 1:
        firsts.append(env[_next_peak(env, right, 1)])
    first_sl = 20 * np.log10(max(firsts) / peak) if firsts and max(firsts) > 0 else None
    return PsfReport(
        method=method or getattr(line, "tag", ""),
        depth_mm=1e3 * c * t[i] / 2,
        axial_width_s=float(width),
        axial_width_mm=float(1e3 * c * width / 2),
        peak_sidelobe_db=None if peak_sl is None else float(peak_sl),
        first_sidelobe_db=None if first_sl is None else float(first_sl),
    )


def lateral_profile(lines, depth_mm, c=SPEED_OF_SOUND, search=3):
    """Envelope at ``depth_mm`` across a fan of lines.

    The largest envelope value within ``search`` samples of the nominal
    depth sample is used, which absorbs sub-sample peak placement.
    """
    env = envelope(np.stack([ln.samples for ln in lines]))
    fs = lines[0].fs
    i = int(round(2 * depth_mm * 1e-3 / c * fs))
    if not 0 <= i < env.shape[1]:
        raise MeasurementError(f"depth {depth_mm} mm is outside the lines")
    return env[:, max(0, i - search) : i + search + 1].max(axis=1)


def measure_lateral_psf(lines, depth_mm, c=SPEED_OF_SOUND, search=3, method=None, theta_span=None):
    """Half-power width of the lateral profile at ``depth_mm``.

    ``theta_span=(lo, hi)`` keeps only lines inside that angle range, which
    separates reflectors sharing a depth.  Raises :class:`MeasurementError`
    if the profile maximum lies only at an end of the angle grid (the
    reflector is not bracketed).
    """
    if theta_span is not None:
        lines = [ln for ln in lines if theta_span[0] <= ln.theta <= theta_span[1]]
    if len(lines) < 2:
        raise MeasurementError("need at least two lines")
    thetas = check_sorted("theta grid", [ln.theta for ln in lines])
    prof = lateral_profile(lines, depth_mm, c, search)
    top = prof.max()
    if not top > 0:
        raise MeasurementError("no signal at the requested depth")
    interior = prof[1:-1]
    if interior.size == 0 or interior.max() < top * (1 - 1e-9):
        raise MeasurementError("the reflector is not bracketed by the angle grid")
    width = half_power_width(thetas, prof)
    return PsfReport(
        method=method or lines[0].tag,
        depth_mm=float(depth_mm),
        lateral_width_rad=float(width),
        lateral_width_mm=float(width * depth_mm),
    )


@dataclass(frozen=True)
class ComplexityReport:
    """Multiplications per scan line for FoCUS (``Na``) and pre-compression (``Nb``)."""

    Na: int
    Nb: int
    Nsaved: int
    ratio: float
    params: dict = field(default_factory=dict)
    log_base: str = "2"


def _log(x, base):
    return math.log(x) / math.log(LOG_BASES[base])


def complexity_model(M, N_s, N_h, K, N_q, log_base="2", P=None):
    """Closed-form multiplication counts.

    ``Na = M K N_q + (N_s / 2) log N_s`` (weighting plus one inverse FFT);
    ``Nb = M N_s + M (1.5 L log L + L)`` with ``L = N_s + N_h`` (linear
    interpolation plus a per-channel FFT matched filter);
    ``Nsaved = (M - 1)(1.5 L log L + L)`` is what post-compression saves
    relative to pre-compression.

    Counts are rounded to integers and ``ratio = Nb / Na`` uses the rounded
    values.
    """
    log_base = str(log_base)
    if log_base not in LOG_BASES:
        raise InvalidParameterError(f"log_base must be one of {tuple(LOG_BASES)}, got {log_base!r}")
    for name, v in (("M", M), ("N_s", N_s), ("N_h", N_h), ("K", K), ("N_q", N_q)):
        if v < 1:
            raise InvalidParameterError(f"{name} must be >= 1, got {v!r}")
    L = N_s + N_h
    mf = 1.5 * L * _log(L, log_base) + L
    Na = int(round(M * K * N_q + N_s / 2 * _log(N_s, log_base)))
    Nb = int(round(M * N_s + M * mf))
    Nsaved = int(round((M - 1) * mf))
    params = {"M": M, "N_s": N_s, "N_h": N_h, "K": K, "N_q": N_q, "P": P}
    return ComplexityReport(Na=max(Na, 1), Nb=Nb, Nsaved=Nsaved, ratio=Nb / max(Na, 1), params=params, log_base=log_base)


def scaled_sizes(P, T, f_ref, D):
    """Samples per element and pulse length at oversampling ``P``.

    ``N_s = T P f_ref`` and ``N_h = D P``, both rounded.
    """
    return int(round(T * P * f_ref)), int(round(D * P))


class MultiplicationCounter:
    """Tally of real or complex scalar multiplications performed by instrumented kernels."""

    def __init__(self):
        self.count = 0

    def mul(self, a, b):
        out = np.multiply(a, b)
        self.count += int(np.size(out))
        return out

    def fft(self, x, inverse=False):
        """Radix-2 decimation-in-time FFT along the last axis, counting twiddle products.

        The input is zero-padded to the next power of two.
        """
        x = np.asarray(x, dtype=np.complex128)
        n = 1 << max(0, int(np.ceil(np.log2(max(x.shape[-1], 1)))))
        if n != x.shape[-1]:
            x = np.concatenate([x, np.zeros(x.shape[:-1] + (n - x.shape[-1],))], axis=-1)
        bits = int(np.log2(n))
        rev = np.zeros(n, dtype=np.int64)
        for b in range(bits):
            rev |= ((np.arange(n) >> b) & 1) << (bits - 1 - b)
        y = x[..., rev]
        sign = 1.0 if inverse else -1.0
        size = 2
        batch = int(np.prod(x.shape[:-1]))
        while size <= n:
            half = size // 2
            tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
            y = y.reshape(x.shape[:-1] + (n // size, size))
            odd = y[..., half:] * tw
            self.count += batch * (n // size) * half
            y = np.concatenate([y[..., :half] + odd, y[..., :half] - odd], axis=-1)
            size *= 2
        y = y.reshape(x.shape[:-1] + (n,))
        return y / n if inverse else y


def count_focus_multiplications(M, N_s, K, N_q, seed=0):
    """Run one FoCUS scan line on random data with instrumented arithmetic.

    Returns ``(count, fft_length)``.
    """
    rng = np.random.default_rng(seed)
    cnt = MultiplicationCounter()
    coeffs = rng.standard_normal((M, K + N_q - 1)) + 1j * rng.standard_normal((M, K + N_q - 1))
    table = rng.standard_normal((K, M, N_q)) + 1j * rng.standard_normal((K, M, N_q))
    idx = np.arange(K)[:, None] + np.arange(N_q)[None, :]
    prods = cnt.mul(coeffs[:, idx], np.transpose(table, (1, 0, 2)))
    beam = np.zeros(N_s, dtype=np.complex128)
    beam[:K] = prods.sum(axis=(0, 2))
    cnt.fft(beam, inverse=True)
    return cnt.count


def count_pre_compression_multiplications(M, N_s, N_h, seed=0):
    """Run one pre-compression scan line on random data with instrumented arithmetic.

    Each channel is matched-filtered by FFT convolution (two forward
    transforms, one spectral product, one inverse transform) and then
    sampled by linear interpolation (one weight product per output sample).
    """
    rng = np.random.default_rng(seed)
    cnt = MultiplicationCounter()
    data = rng.standard_normal((M, N_s))
    pulse = rng.standard_normal(N_h)
    L = N_s + N_h
    X = cnt.fft(np.pad(data, ((0, 0), (0, L - N_s))))
    S = cnt.fft(np.broadcast_to(np.pad(pulse, (0, L - N_h)), (M, L)))
    comp = np.real(cnt.fft(cnt.mul(X, np.conj(S)), inverse=True))[:, :N_s]
    pos = np.sort(rng.uniform(0, N_s - 1, size=(M, N_s)), axis=1)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, N_s - 1)
    w = pos - i0
    lo = np.take_along_axis(comp, i0, axis=1)
    hi = np.take_along_axis(comp, i1, axis=1)
    _ = lo + cnt.mul(w, hi - lo)
    return cnt.count


PSF_COLUMNS = (
    "method",
    "n_q",
    "P",
    "depth_mm",
    "axial_width_s",
    "axial_width_mm",
    "lateral_width_rad",
    "lateral_width_mm",
    "peak_sidelobe_db",
    "first_sidelobe_db",
)
COMPLEXITY_COLUMNS = ("n_q", "P", "M", "N_s", "N_h", "K", "log_base", "Na", "Nb", "Nsaved", "ratio")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_psf_csv(reports, path):
    """One row per report, columns in :data:`PSF_COLUMNS` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PSF_COLUMNS)
        for r in reports:
            w.writerow([_fmt(getattr(r, col)) for col in PSF_COLUMNS])


def write_complexity_csv(reports, path):
    """One row per report, columns in :data:`COMPLEXITY_COLUMNS` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPLEXITY_COLUMNS)
        for r in reports:
            p = r.params
            row = [p["N_q"], p.get("P"), p["M"], p["N_s"], p["N_h"], p["K"], r.log_base, r.Na, r.Nb, r.Nsaved, r.ratio]
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
