"""Coded excitation pulses, matched filtering and ambiguity analysis.

All continuous-time integrals are realized as Riemann sums on the sample grid,
so an autocorrelation value carries units of amplitude^2 * seconds.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import hilbert
from scipy.signal.windows import tukey

from .exceptions import InvalidParameterError
from .validation import check_positive

WINDOWS = ("rect", "tukey")


@dataclass(frozen=True)
class CodedPulse:
    """Sampled transmit waveform together with its design parameters.

    Attributes
    ----------
    f0 : float
        Carrier (center) frequency in Hz.
    B : float
        Sweep bandwidth in Hz.
    Tp : float
        Pulse duration in seconds.
    fs : float
        Sample rate in Hz.
    window : str
        Amplitude taper, ``"rect"`` or ``"tukey"``.
    taper : float
        Fraction of the pulse covered by the cosine tapers (tukey only).
    samples : ndarray
        Real or complex samples, length ``round(Tp * fs)``.
    """

    f0: float
    B: float
    Tp: float
    fs: float
    window: str
    taper: float
    samples: np.ndarray = field(repr=False)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def time_bandwidth(self):
        return self.Tp * self.B

    @property
    def t(self):
        return np.arange(self.n_samples) / self.fs

    @property
    def energy(self):
        return float(np.sum(np.abs(self.samples) ** 2) / self.fs)

    def shifted(self, f_shift):
        """Return the pulse with its carrier moved down by ``f_shift`` Hz.

        The complex envelope is untouched; only the carrier changes.
        """
        if f_shift == 0:
            return self
        if np.isfinite(self.f0) and np.isfinite(self.B):
            return _linear_fm(self.f0 - f_shift, self.B, self.Tp, self.fs, self.window, self.taper)
        # sample-only pulse: rotate the analytic signal
        analytic = hilbert(np.real(self.samples))
        moved = np.real(analytic * np.exp(-2j * np.pi * f_shift * self.t))
        return replace(self, samples=moved)


def _window(n, window, taper):
    if window == "rect":
        return np.ones(n)
    if window == "tukey":
        return tukey(n, alpha=taper, sym=True) if n > 1 else np.ones(n)
    raise InvalidParameterError(f"window must be one of {WINDOWS}, got {window!r}")


def _linear_fm(f0, B, Tp, fs, window, taper):
    n = int(round(Tp * fs))
    t = np.arange(n) / fs
    phase = 2 * np.pi * ((f0 - B / 2) * t + B / (2 * Tp) * t**2)
    samples = _window(n, window, taper) * np.cos(phase)
    return CodedPulse(f0=f0, B=B, Tp=Tp, fs=fs, window=window, taper=taper, samples=samples)


def make_linear_fm(f0, B, Tp, fs, window="tukey", taper=0.1):
    """Build a real linear FM pulse sweeping from ``f0 - B/2`` to ``f0 + B/2``.

    Parameters
    ----------
    f0, B : float
        Center frequency and sweep bandwidth in Hz.
    Tp : float
        Duration in seconds.
    fs : float
        Sample rate in Hz; must exceed ``2 * (f0 + B/2)``.
    window : {"tukey", "rect"}
        Amplitude taper applied multiplicatively.
    taper : float
        Tukey taper fraction in [0, 1].

    Returns
    -------
    CodedPulse
    """
    check_positive("Tp", Tp)
    check_positive("B", B)
    check_positive("f0", f0)
    check_positive("fs", fs)
    if fs <= 2 * (f0 + B / 2):
        raise InvalidParameterError(
            f"fs must exceed 2*(f0 + B/2) = {2 * (f0 + B / 2):.6g} Hz (Nyquist), got {fs:.6g}"
        )
    if window not in WINDOWS:
        raise InvalidParameterError(f"window must be one of {WINDOWS}, got {window!r}")
    if not 0 <= taper <= 1:
        raise InvalidParameterError(f"taper must lie in [0, 1], got {taper!r}")
    if int(round(Tp * fs)) < 2:
        raise InvalidParameterError("Tp * fs must give at least two samples")
    return _linear_fm(float(f0), float(B), float(Tp), float(fs), window, float(taper))


def default_split(f0, D):
    """Return ``(B, Tp)`` for time-bandwidth product ``D`` using ``B = 0.6 f0``."""
    B = 0.6 * f0
    return B, D / B


def matched_filter(pulse):
    """Impulse response ``h[n] = conj(s[-n])`` stored in natural order.

    Element ``j`` of the result holds ``h`` at lag ``-(N_h - 1) + j``.
    """
    return np.conj(pulse.samples[::-1])


def correlate(x, pulse_samples, fs):
    """Full cross-correlation ``sum_j x[n + j] conj(s[j]) / fs`` via FFT.

    Returns the lags (in samples, from ``-(N_h-1)`` to ``N_x-1``) and values.
    """
    x = np.asarray(x)
    s = np.asarray(pulse_samples)
    n_out = x.shape[-1] + s.shape[0] - 1
    n_fft = sp_fft.next_fast_len(n_out)
    complex_out = np.iscomplexobj(x) or np.iscomplexobj(s)
    if complex_out:
        X = sp_fft.fft(x, n_fft, axis=-1)
        S = sp_fft.fft(s, n_fft)
        r = sp_fft.ifft(X * np.conj(S), axis=-1)
    else:
        X = sp_fft.rfft(x, n_fft, axis=-1)
        S = sp_fft.rfft(s, n_fft)
        r = sp_fft.irfft(X * np.conj(S), n_fft, axis=-1)
    # lag -(N_h-1)..-1 sits at the end of the circular buffer
    r = np.concatenate([r[..., n_fft - (s.shape[0] - 1):], r[..., : x.shape[-1]]], axis=-1) / fs
    lags = np.arange(-(s.shape[0] - 1), x.shape[-1])
    return lags, r


def apply_matched_filter(x, pulse):
    """Matched-filter ``x`` so an echo starting at sample ``d`` peaks at sample ``d``.

    The output has the same length as ``x`` (negative lags are dropped).
    """
    lags, r = correlate(x, pulse.samples, pulse.fs)
    return r[..., pulse.n_samples - 1:]


def autocorrelation(pulse):
    """Sampled autocorrelation over lags ``[-Tp, Tp]``.

    Returns
    -------
    lags : ndarray
        Lag times in seconds.
    values : ndarray
        ``R_ss`` at each lag, computed in the frequency domain.
    """
    lags, r = correlate(pulse.samples, pulse.samples, pulse.fs)
    return lags / pulse.fs, r


@dataclass(frozen=True)
class AmbiguityMap:
    """``|A(t, f)|`` sampled on a delay grid (columns) and a shift grid (rows).

    ``raw`` keeps the signed correlation so envelopes can be taken later.
    """

    delays: np.ndarray
    shifts: np.ndarray
    values: np.ndarray
    raw: np.ndarray = field(repr=False)

    def envelope(self):
        return np.abs(hilbert(np.real(self.raw), axis=-1))


def ambiguity(pulse, shifts):
    """Matched-filter response to carrier-downshifted replicas of ``pulse``.

    Row ``i`` correlates the pulse shifted down by ``shifts[i]`` Hz against the
    unshifted pulse.  With this convention a downshift ``f > 0`` on an
    up-chirp moves the response peak to a positive delay ``f * Tp / B``.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=np.float64))
    if np.any(np.abs(shifts) > pulse.B):
        raise InvalidParameterError("frequency shifts must lie within +/- B")
    rows = []
    for f in shifts:
        _, r = correlate(pulse.shifted(f).samples, pulse.samples, pulse.fs)
        rows.append(r)
    raw = np.asarray(rows)
    delays = np.arange(-(pulse.n_samples - 1), pulse.n_samples) / pulse.fs
    return AmbiguityMap(delays=delays, shifts=shifts, values=np.abs(raw), raw=raw)


def half_power_width(x, y):
    """Full width of the main lobe of ``y`` at ``max(y) / sqrt(2)``.

    Crossings are located by linear interpolation between samples.  When the
    lobe reaches an end of the grid, that end is used as the edge.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    i = int(np.argmax(y))
    level = y[i] / np.sqrt(2)
    j = i
    while j > 0 and y[j - 1] >= level:
        j -= 1
    if j == 0:
        left = x[0]
    else:
        left = x[j - 1] + (level - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1])
    j = i
    while j < len(y) - 1 and y[j + 1] >= level:
        j += 1
    if j == len(y) - 1:
        right = x[-1]
    else:
        right = x[j] + (y[j] - level) / (y[j] - y[j + 1]) * (x[j + 1] - x[j])
    return right - left


def save_waveform(pulse, path):
    """Write ``time_s amplitude`` columns, with the design parameters in a header."""
    header = (
        f"f0={pulse.f0!r} B={pulse.B!r} Tp={pulse.Tp!r} fs={pulse.fs!r} "
        f"window={pulse.window} taper={pulse.taper!r}\ntime_s amplitude"
    )
    np.savetxt(path, np.column_stack([pulse.t, np.real(pulse.samples)]), header=header, fmt="%.17g")


def load_waveform(path):
    """Read a two-column waveform file written by :func:`save_waveform` or another tool.

    Design parameters missing from the header are set to NaN; ``fs`` is then
    taken from the time column.
    """
    params = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    params[key] = value
    data = np.loadtxt(path, ndmin=2)
    t, samples = data[:, 0], data[:, 1]
    fs = float(params["fs"]) if "fs" in params else 1.0 / float(np.mean(np.diff(t)))
    return CodedPulse(
        f0=float(params.get("f0", "nan")),
        B=float(params.get("B", "nan")),
        Tp=float(params.get("Tp", len(samples) / fs)),
        fs=fs,
        window=params.get("window", "rect"),
        taper=float(params.get("taper", "0")),
        samples=samples,
    )
