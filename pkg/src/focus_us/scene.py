"""Array geometry, point-scatterer phantoms and channel-data synthesis."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

from .exceptions import InvalidParameterError
from .validation import check_positive

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 1540.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear receive array.

    Attributes
    ----------
    offsets : ndarray
        Signed distance of each element from the reference element, in meters.
    m0 : int
        Zero-based index of the reference element (its offset is 0).
    c : float
        Speed of sound in m/s.
    """

    offsets: np.ndarray
    m0: int
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.float64)
        object.__setattr__(self, "offsets", offsets)
        if offsets.ndim != 1 or offsets.size == 0:
            raise InvalidParameterError("offsets must be a non-empty 1-D array")
        if not 0 <= self.m0 < offsets.size or offsets[self.m0] != 0:
            raise InvalidParameterError("the reference element must have zero offset")
        if self.c <= 0:
            raise InvalidParameterError("speed of sound must be positive")
        if offsets.size > 1 and not (np.all(np.diff(offsets) > 0) or np.all(np.diff(offsets) < 0)):
            raise InvalidParameterError("element offsets must be strictly monotone")

    @property
    def n_elements(self):
        return self.offsets.size

    @property
    def gammas(self):
        """Element offsets expressed in seconds of travel (``delta / c``)."""
        return self.offsets / self.c

    def __eq__(self, other):
        return (
            isinstance(other, ArrayGeometry)
            and self.m0 == other.m0
            and self.c == other.c
            and np.array_equal(self.offsets, other.offsets)
        )

    def __hash__(self):
        return hash((self.offsets.tobytes(), self.m0, self.c))


def uniform_linear_array(M, pitch, c=SPEED_OF_SOUND):
    """Equally spaced array whose element ``ceil(M/2)`` (1-based) sits at the origin."""
    if int(M) != M or M < 1:
        raise InvalidParameterError(f"M must be a positive integer, got {M!r}")
    check_positive("pitch", pitch)
    check_positive("c", c)
    M = int(M)
    m0 = (M + 1) // 2 - 1
    offsets = (np.arange(M) - m0) * float(pitch)
    return ArrayGeometry(offsets=offsets, m0=m0, c=float(c))


def arrival_time(geometry, m, t, theta):
    """Time at which element ``m`` receives the echo from the point reached at time ``t``.

    The transmit pulse reaches ``(c t sin(theta), c t cos(theta))`` at time ``t``;
    the echo then travels back to the element.
    """
    c = geometry.c
    delta = geometry.offsets[m]
    t = np.asarray(t, dtype=np.float64)
    d = np.sqrt((c * t * np.cos(theta)) ** 2 + (delta - c * t * np.sin(theta)) ** 2)
    return t + d / c


def delay_curve(geometry, m, t, theta):
    """Dynamic-focus sampling time ``tau_m(t; theta)`` for beam time ``t``."""
    gamma = geometry.gammas[m]
    return _delay(np.asarray(t, dtype=np.float64), gamma, theta)


def _delay(t, gamma, theta):
    disc = t * t - 4 * gamma * t * np.sin(theta) + 4 * gamma * gamma
    # (t - 2 gamma sin)^2 + 4 gamma^2 cos^2 >= 0; rounding can only give -eps
    assert np.all(disc >= -1e-30 * np.maximum(1.0, t * t)), "negative discriminant in delay curve"
    return 0.5 * (t + np.sqrt(np.maximum(disc, 0.0)))


def _inverse_delay(x, gamma, theta):
    """Beam time ``t`` such that ``tau(t) = x`` (valid for ``x >= |gamma|``)."""
    return (x * x - gamma * gamma) / (x - gamma * np.sin(theta))


def beam_end_time(geometry, theta, T):
    """``T_B(theta)``: the last beam time at which every element still has data."""
    gammas = geometry.gammas
    return float(np.min(_inverse_delay(T, gammas, theta)))


@dataclass(frozen=True)
class Scatterer:
    r: float
    theta: float
    alpha: float = 1.0
    f_shift: float = 0.0


@dataclass(frozen=True)
class Phantom:
    """Collection of point scatterers (range in m, direction in rad)."""

    scatterers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        for s in self.scatterers:
            if not s.r > 0:
                raise InvalidParameterError(f"scatterer range must be positive, got {s.r}")
            if not np.isfinite(s.alpha):
                raise InvalidParameterError("scatterer reflectivity must be finite")
            if s.f_shift < 0:
                raise InvalidParameterError("frequency downshift must be non-negative")

    def __add__(self, other):
        return Phantom(self.scatterers + other.scatterers)

    def __len__(self):
        return len(self.scatterers)

    @classmethod
    def from_rows(cls, rows):
        return cls(tuple(Scatterer(*map(float, row)) for row in rows))


def load_phantom(path):
    """Read ``r_m theta_rad alpha f_shift_hz`` rows (``#`` starts a comment)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise InvalidParameterError(f"{path}: expected 4 columns, got {line!r}")
            rows.append(parts)
    return Phantom.from_rows(rows)


def save_phantom(phantom, path):
    with open(path, "w") as fh:
        fh.write("# r_m theta_rad alpha f_shift_hz\n")
        for s in phantom.scatterers:
            fh.write(f"{s.r!r} {s.theta!r} {s.alpha!r} {s.f_shift!r}\n")


@dataclass(frozen=True)
class ChannelFrame:
    """Per-element received samples, shape ``(M, N_s)``, sampled at ``fs`` over ``[0, T)``."""

    data: np.ndarray = field(repr=False)
    fs: float
    T: float
    geometry: ArrayGeometry = None
    pulse: object = None
    warnings: tuple = ()

    @property
    def n_elements(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]


def synthesize_channels(geometry, phantom, pulse, fs, T, noise_rms=0.0, seed=None):
    """Simulate the echoes of ``phantom`` received by every element.

    Each echo is the (possibly carrier-downshifted) pulse delayed by the exact
    arrival time; sub-sample delays are applied with a band-limited
    (Fourier-domain) fractional shift of the sampled pulse.

    Parameters
    ----------
    geometry : ArrayGeometry
    phantom : Phantom
    pulse : CodedPulse
        Sampled at ``fs``.
    fs, T : float
        Sample rate (Hz) and acquisition window (s); ``N_s = round(T fs)``.
    noise_rms : float
        Standard deviation of additive white Gaussian noise.
    seed : int or None
        Seed for the noise generator.

    Returns
    -------
    ChannelFrame
    """
    check_positive("fs", fs)
    check_positive("T", T)
    if abs(pulse.fs - fs) > 1e-9 * fs:
        raise InvalidParameterError("pulse must be sampled at the frame rate")
    n_s = int(round(T * fs))
    M = geometry.n_elements
    n_h = pulse.n_samples
    n_fft = sp_fft.next_fast_len(n_s + 2 * n_h)
    freqs = sp_fft.rfftfreq(n_fft, 1.0 / fs)

    spectra = {}
    acc = np.zeros((M, freqs.size), dtype=np.complex128)
    notes = []
    for s in phantom.scatterers:
        if s.f_shift not in spectra:
            spectra[s.f_shift] = sp_fft.rfft(np.real(pulse.shifted(s.f_shift).samples), n_fft)
        arrivals = np.array([arrival_time(geometry, m, s.r / geometry.c, s.theta) for m in range(M)])
        if np.max(arrivals) + pulse.Tp > T:
            msg = f"scatterer at r={s.r:.4g} m, theta={s.theta:.4g} rad is truncated by T={T:.4g} s"
            logger.warning(msg)
            notes.append(msg)
        acc += s.alpha * spectra[s.f_shift][np.newaxis, :] * np.exp(
            -2j * np.pi * freqs[np.newaxis, :] * arrivals[:, np.newaxis]
        )
    data = sp_fft.irfft(acc, n_fft, axis=1)[:, :n_s]
    if noise_rms > 0:
        rng = np.random.default_rng(seed)
        data = data + noise_rms * rng.standard_normal(data.shape)
    return ChannelFrame(data=data, fs=float(fs), T=n_s / fs, geometry=geometry, pulse=pulse, warnings=tuple(notes))
