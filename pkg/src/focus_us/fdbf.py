"""Frequency-domain beamforming with pulse compression folded into the weights.

Conventions
-----------
Each channel is represented by Fourier-series coefficients over a grid of
``n_grid`` samples (the ``N_s`` acquired samples followed by ``pad`` zeros),
i.e. over the interval ``[0, n_grid / fs)``.  Coefficient ``k`` corresponds
to ``k * fs / n_grid`` Hz and ``c_m[k] = DFT(phi_m)[k] / n_grid``.  Padding
by at least the pulse length makes the circular matched filter equal to the
linear one on the acquired window.

Only the positive-frequency band is carried; lines are rebuilt with a
Hermitian-symmetric inverse transform.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sp_fft

from .exceptions import InvalidInputError, InvalidParameterError, OutOfBandError, StaleLUTError
from .scene import _delay, beam_end_time
from .tdbf import BeamLine
from .validation import check_channel_matrix, check_nonnegative_int

LUT_VERSION = 1


def fourier_coefficients(data, n_grid):
    """Complex Fourier coefficients of each row over ``n_grid`` samples (zero padded)."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return sp_fft.fft(data, n_grid, axis=-1) / n_grid


def mf_spectrum(pulse, n_grid):
    """Matched-filter multipliers ``h[k]`` for ``k = 0 .. n_grid - 1``.

    ``c_m[k] * h[k]`` are the coefficients of the matched-filter output
    ``sum_j phi[n + j] s[j] / fs`` (circular over the grid).
    """
    return np.conj(sp_fft.fft(pulse.samples, n_grid)) / pulse.fs


@dataclass(frozen=True)
class SpectrumSet:
    """Band-limited channel coefficients.

    Attributes
    ----------
    coeffs : ndarray, shape (M, K)
        ``c_m[k]`` for ``k`` in ``band``.
    band : ndarray
        Contiguous coefficient indices (``core`` dilated by the guard).
    core : tuple
        ``(first, last)`` indices of the above-threshold matched-filter band.
    n_grid : int
        Length of the Fourier grid.
    fs : float
    n_samples : int
        Acquired samples per channel (``N_s``).
    """

    coeffs: np.ndarray = field(repr=False)
    band: np.ndarray
    core: tuple
    n_grid: int
    fs: float
    n_samples: int
    empty: bool = False

    @property
    def T(self):
        return self.n_grid / self.fs

    @property
    def T_acq(self):
        return self.n_samples / self.fs

    @property
    def G(self):
        return 0 if self.empty else self.core[1] - self.core[0] + 1

    def restrict(self, band):
        band = np.asarray(band)
        lo = band[0] - self.band[0]
        if lo < 0 or band[-1] > self.band[-1]:
            raise OutOfBandError("requested band is not covered by these spectra")
        return replace(self, coeffs=self.coeffs[:, lo : lo + band.size], band=band)


def select_band(mf_power, threshold_db, n1=0, n2=0, n_grid=None):
    """Indices where ``sqrt(mf_power)`` is within ``threshold_db`` of its peak.

    Returns ``(core, band)`` where ``core`` is the ``(first, last)`` index span
    of the above-threshold set and ``band`` is that span widened by ``n1``
    below and ``n2`` above, clipped to the positive half-spectrum.
    """
    mag = np.sqrt(np.asarray(mf_power, dtype=np.float64))
    peak = mag.max() if mag.size else 0.0
    if peak <= 0:
        return None, np.arange(0)
    keep = np.flatnonzero(20 * np.log10(np.maximum(mag, 1e-300) / peak) > -threshold_db)
    core = (int(keep[0]), int(keep[-1]))
    top = (n_grid // 2) if n_grid is not None else mag.size - 1
    band = np.arange(max(core[0] - n1, 0), min(core[1] + n2, top) + 1)
    return core, band


def compute_channel_spectra(frame, pulse, band_threshold_db=40.0, n1=14, n2=14, pad=None, band=None):
    """Fourier coefficients of every channel restricted to the signal band.

    Parameters
    ----------
    frame : ChannelFrame
    pulse : CodedPulse
        Transmit pulse; its matched filter defines the band.
    band_threshold_db : float
        Keep coefficients whose matched-filter output magnitude (summed over
        channels) is within this many dB of the peak.
    n1, n2 : int
        Guard widths added below/above the retained band so that a
        ``[-n1, n2]`` convolution window has all of its inputs.
    pad : int, optional
        Zero samples appended before transforming.  By default the grid is
        the smallest fast FFT length holding ``N_s`` plus the pulse length.
    band : array_like, optional
        Use this coefficient band instead of selecting one from the data.

    Returns
    -------
    SpectrumSet
    """
    data = check_channel_matrix(frame.data)
    n_s = data.shape[1]
    if n_s == 0:
        raise InvalidInputError("frame has no samples")
    if pad is None:
        n_grid = sp_fft.next_fast_len(n_s + pulse.n_samples)
    else:
        n_grid = n_s + check_nonnegative_int("pad", pad)
    coeffs = fourier_coefficients(data, n_grid)[:, : n_grid // 2 + 1]
    empty = False
    if band is None:
        h = mf_spectrum(pulse, n_grid)[: n_grid // 2 + 1]
        power = np.sum(np.abs(coeffs * h) ** 2, axis=0)
        core, band = select_band(power, band_threshold_db, n1, n2, n_grid)
        if core is None:
            empty = True
            core = (0, -1)
    else:
        band = np.asarray(band, dtype=np.int64)
        if band.size and (np.any(np.diff(band) != 1) or band[0] < 0 or band[-1] > n_grid // 2):
            raise InvalidInputError("band must be a contiguous range of non-negative indices")
        core = (int(band[0]) + n1, int(band[-1]) - n2) if band.size else (0, -1)
        empty = band.size == 0
    return SpectrumSet(
        coeffs=coeffs[:, band],
        band=band,
        core=core,
        n_grid=n_grid,
        fs=float(frame.fs),
        n_samples=n_s,
        empty=empty,
    )


def lut_fingerprint(geometry, theta, band, n1, n2, n_grid, fs, n_samples):
    """SHA-256 over everything a Q table depends on."""
    h = hashlib.sha256()
    h.update(f"focus-lut-v{LUT_VERSION}".encode())
    h.update(np.ascontiguousarray(geometry.offsets, dtype="<f8").tobytes())
    h.update(np.array([geometry.c, theta, fs], dtype="<f8").tobytes())
    band = np.asarray(band)
    lo, hi = (int(band[0]), int(band[-1])) if band.size else (0, -1)
    h.update(np.array([geometry.m0, lo, hi, n1, n2, n_grid, n_samples], dtype="<i8").tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class QTable:
    """Fourier-domain beamforming weights for one steering direction.

    ``entries[i, m, j]`` holds the weight for output coefficient ``band[i]``,
    element ``m`` and offset ``n = j - n1``.
    """

    theta: float
    n1: int
    n2: int
    band: np.ndarray
    n_grid: int
    fs: float
    n_samples: int
    entries: np.ndarray = field(repr=False)
    mf_integrated: bool
    fingerprint: str

    @property
    def n_q(self):
        return self.n1 + self.n2 + 1

    @property
    def n_elements(self):
        return self.entries.shape[1]

    @property
    def offsets_n(self):
        return np.arange(-self.n1, self.n2 + 1)

    def subtable(self, band, n1, n2, geometry):
        """Rows for ``band`` and offsets ``[-n1, n2]`` of this table.

        Entries are computed independently per (k, n), so the result equals a
        fresh build with the narrower parameters.
        """
        band = np.asarray(band)
        if n1 > self.n1 or n2 > self.n2:
            raise InvalidParameterError("subtable window exceeds the table window")
        lo = band[0] - self.band[0]
        if lo < 0 or band[-1] > self.band[-1]:
            raise OutOfBandError("requested band is not covered by this table")
        j0 = self.n1 - n1
        entries = self.entries[lo : lo + band.size, :, j0 : j0 + n1 + n2 + 1]
        fp = lut_fingerprint(geometry, self.theta, band, n1, n2, self.n_grid, self.fs, self.n_samples)
        return replace(self, band=band, n1=n1, n2=n2, entries=np.ascontiguousarray(entries), fingerprint=fp)


def distortion_support(geometry, theta, n_samples, fs):
    """Per-element ``[lo, hi)`` receive-time support of the distortion function."""
    T_acq = n_samples / fs
    t_end = beam_end_time(geometry, theta, T_acq)
    gammas = geometry.gammas
    return np.abs(gammas), _delay(np.full_like(gammas, t_end), gammas, theta)


def _distortion_on_support(geometry, m, theta, ks, n_grid, fs, n_samples, dtype=np.complex128):
    """Grid indices where ``q_{k,m}`` is nonzero and its values there, shape ``(len(ks), n)``."""
    gamma = geometry.gammas[m]
    lo, hi = distortion_support(geometry, theta, n_samples, fs)
    i0 = int(np.ceil(lo[m] * fs - 1e-9))
    i1 = int(np.ceil(hi[m] * fs - 1e-9))
    inside = np.arange(max(i0, 0), min(i1, n_grid))
    if inside.size == 0 or gamma == 0:
        return inside, np.ones((ks.size, inside.size), dtype=dtype)
    xs = inside / fs
    s, c = np.sin(theta), np.cos(theta)
    denom = xs - gamma * s
    if np.any(denom <= 0):
        raise InvalidParameterError(
            f"distortion function pole inside support for element {m} at theta={theta}"
        )
    jac = 1.0 + (gamma * c) ** 2 / denom**2
    warp = gamma * (gamma - xs * s) / denom
    T = n_grid / fs
    return inside, _harmonics(ks, (2 * np.pi / T) * warp, weight=jac, dtype=dtype)


def distortion_function(geometry, m, theta, ks, n_grid, fs, n_samples):
    """Sample ``q_{k,m}(x; theta)`` on the Fourier grid for every ``k`` in ``ks``.

    Returns an array of shape ``(len(ks), n_grid)``.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    inside, values = _distortion_on_support(geometry, m, theta, ks, n_grid, fs, n_samples)
    q = np.zeros((ks.size, n_grid), dtype=np.complex128)
    q[:, inside] = values
    return q


def _harmonics(ks, phase, block=32, weight=None, dtype=np.complex128):
    """``weight * exp(1j * k * phase)`` for integer ``ks``, built from two small exp tables.

    ``k = block * a + b`` is split on the absolute index, so each row depends
    only on its own ``k`` (not on the other requested indices).
    """
    hi, lo = np.divmod(ks, block)
    hi_vals = np.unique(hi)
    coarse = np.exp(1j * (block * hi_vals)[:, np.newaxis] * phase[np.newaxis, :])
    fine = np.exp(1j * np.arange(block)[:, np.newaxis] * phase[np.newaxis, :])
    if weight is not None:
        fine *= weight
    coarse, fine = coarse.astype(dtype, copy=False), fine.astype(dtype, copy=False)
    return coarse[np.searchsorted(hi_vals, hi)] * fine[lo]


def q_coefficients(geometry, m, theta, ks, n_grid, fs, n_samples, offsets=None, dtype=np.complex128):
    """Fourier coefficients ``Q_{k,m}[n]`` of the distortion function.

    Returns all ``n = 0 .. n_grid-1`` (mod ``n_grid``) by default, or only the
    columns for ``offsets``.  Only the support segment is transformed; its
    start is restored with a linear phase.  With ``dtype=np.complex64`` the
    phases are still evaluated in double precision and only the bulk
    products and the transform run in single precision.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
    n = np.arange(n_grid) if offsets is None else np.asarray(offsets) % n_grid
    inside, values = _distortion_on_support(geometry, m, theta, ks, n_grid, fs, n_samples, dtype)
    if inside.size == 0:
        return np.zeros((ks.size, n.size), dtype=np.complex128)
    Q = sp_fft.fft(values, n_grid, axis=-1)[:, n]
    return Q * (np.exp(-2j * np.pi * n * inside[0] / n_grid) / n_grid)


def build_q_table(geometry, theta, band, n1, n2, n_grid, fs, n_samples):
    """Tabulate ``Q_{k,m;theta}[n]`` for ``k`` in ``band`` and ``n`` in ``[-n1, n2]``.

    Parameters
    ----------
    geometry : ArrayGeometry
    theta : float
        Steering direction in radians.
    band : array_like
        Contiguous output coefficient indices.
    n1, n2 : int
        Truncation window bounds.
    n_grid, fs : int, float
        Fourier grid length and sample rate.
    n_samples : int
        Acquired samples ``N_s``; fixes the beam truncation time ``T_B``.

    Returns
    -------
    QTable
    """
    n1 = check_nonnegative_int("n1", n1)
    n2 = check_nonnegative_int("n2", n2)
    band = np.asarray(band, dtype=np.int64)
    if band.size == 0:
        raise InvalidParameterError("band must be non-empty")
    if np.any(np.diff(band) != 1):
        raise InvalidParameterError("band must be contiguous")
    if abs(theta) >= np.pi / 2:
        raise InvalidParameterError("steering angle must satisfy |theta| < pi/2")
    M = geometry.n_elements
    offsets = np.arange(-n1, n2 + 1)
    entries = np.empty((band.size, M, offsets.size), dtype=np.complex64)
    direct = offsets.size <= 64
    x = np.arange(n_grid)
    for m in range(M):
        if direct:
            # only n_q of n_grid outputs are needed: project onto those DFT rows
            support, values = _distortion_on_support(geometry, m, theta, band, n_grid, fs, n_samples)
            kernel = np.exp(-2j * np.pi * np.outer(x[support], offsets) / n_grid)
            entries[:, m, :] = (values @ kernel) / n_grid
        else:
            entries[:, m, :] = q_coefficients(geometry, m, theta, band, n_grid, fs, n_samples, offsets, np.complex64)
    return QTable(
        theta=float(theta),
        n1=n1,
        n2=n2,
        band=band,
        n_grid=int(n_grid),
        fs=float(fs),
        n_samples=int(n_samples),
        entries=entries,
        mf_integrated=False,
        fingerprint=lut_fingerprint(geometry, theta, band, n1, n2, n_grid, fs, n_samples),
    )


def integrate_mf(q, h_spectrum, start=None):
    """Fold the matched filter into the weights: ``Qt[k, m, n] = h[k - n] Q[k, m, n]``.

    Parameters
    ----------
    q : QTable
        Table without the matched filter.
    h_spectrum : array_like
        Matched-filter multipliers.  With ``start=None`` this is the full
        length-``n_grid`` sequence (indexed modulo ``n_grid``); otherwise it
        covers indices ``start .. start + len - 1``.

    Returns
    -------
    QTable
    """
    if q.mf_integrated:
        raise InvalidInputError("matched filter already integrated into this table")
    h = np.asarray(h_spectrum)
    need = q.band[:, np.newaxis] - q.offsets_n[np.newaxis, :]
    if start is None:
        if h.shape[0] != q.n_grid:
            raise OutOfBandError(f"full matched-filter spectrum must have {q.n_grid} entries, got {h.shape[0]}")
        idx = need % q.n_grid
    else:
        idx = need - start
        if idx.min() < 0 or idx.max() >= h.shape[0]:
            raise OutOfBandError(
                f"matched-filter spectrum covers [{start}, {start + h.shape[0] - 1}] "
                f"but indices [{need.min()}, {need.max()}] are required"
            )
    weights = h[idx][:, np.newaxis, :]
    entries = (weights * q.entries).astype(np.complex64)
    return replace(q, entries=entries, mf_integrated=True)


@dataclass(frozen=True)
class BeamSpectrum:
    """Fourier coefficients ``c_CE[k]`` of one beam over ``band``."""

    coeffs: np.ndarray = field(repr=False)
    band: np.ndarray
    theta: float
    n_grid: int
    fs: float

    @property
    def K(self):
        return self.band.size

    @property
    def T(self):
        return self.n_grid / self.fs


def focus_beamform(spectra, q, element_chunk=None):
    """Combine channel coefficients into beam coefficients.

    ``c_CE[k] = (1/M) sum_m sum_{n=-n1}^{n2} c_m[k - n] Qt[k, m, n]`` for
    ``k`` in the table band; channel coefficients outside ``spectra.band``
    count as zero.
    """
    if not q.mf_integrated:
        raise InvalidInputError("Q table has no matched filter integrated; call integrate_mf first")
    M, K_in = spectra.coeffs.shape
    if (
        q.n_grid != spectra.n_grid
        or q.fs != spectra.fs
        or q.n_samples != spectra.n_samples
        or q.n_elements != M
        or not np.array_equal(q.band, spectra.band)
    ):
        raise StaleLUTError("Q table was built for a different grid, band or array than these spectra")
    src = q.band[:, np.newaxis] - q.offsets_n[np.newaxis, :] - spectra.band[0]
    valid = (src >= 0) & (src < K_in)
    src = np.where(valid, src, 0)
    chunk = element_chunk or max(1, int(4e6 // max(1, src.size)))
    out = np.zeros(q.band.size, dtype=np.complex128)
    for m0 in range(0, M, chunk):
        c = spectra.coeffs[m0 : m0 + chunk][:, src] * valid  # (m, k, n)
        out += np.einsum("mkn,kmn->k", c, q.entries[:, m0 : m0 + chunk, :])
    return BeamSpectrum(coeffs=out / M, band=q.band.copy(), theta=q.theta, n_grid=q.n_grid, fs=q.fs)


def reconstruct_time(beam, n_samples):
    """Inverse transform of the beam band (other coefficients zero), cropped to ``n_samples``."""
    if beam.K > n_samples:
        raise InvalidParameterError("more beam coefficients than output samples")
    half = np.zeros(beam.n_grid // 2 + 1, dtype=np.complex128)
    half[beam.band] = beam.coeffs
    x = sp_fft.irfft(half, beam.n_grid) * beam.n_grid
    return BeamLine(theta=beam.theta, samples=x[:n_samples], fs=beam.fs, tag="focus")


def q_energy_fraction(Q_full, n1, n2):
    """Share of ``sum_n |Q[n]|^2`` that falls inside ``n in [-n1, n2]`` (last axis, mod length)."""
    Q_full = np.asarray(Q_full)
    cols = np.arange(-n1, n2 + 1) % Q_full.shape[-1]
    power = np.abs(Q_full) ** 2
    total = power.sum(axis=-1)
    return np.where(total > 0, power[..., cols].sum(axis=-1) / np.where(total > 0, total, 1), 1.0)
