"""Scikit-learn style estimators wrapping the beamforming pipelines.

``fit`` learns everything that depends only on the acquisition setup (for
FoCUS: the signal band and the Q-coefficient look-up tables), and
``transform`` beamforms channel data into an ``(n_theta, N_s)`` array of
scan lines.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError, InvalidParameterError
from .fdbf import build_q_table, compute_channel_spectra, focus_beamform, integrate_mf, mf_spectrum, reconstruct_time
from .scene import ChannelFrame
from .tdbf import beamform_post_compression, beamform_pre_compression, beamform_time, compress_channels
from .validation import check_channel_matrix, check_finite


def _as_frame(X, pulse, geometry):
    if isinstance(X, ChannelFrame):
        frame = X
    else:
        data = check_channel_matrix(X, geometry.n_elements)
        frame = ChannelFrame(data=data, fs=pulse.fs, T=data.shape[1] / pulse.fs, geometry=geometry, pulse=pulse)
    check_channel_matrix(frame.data, geometry.n_elements)
    if abs(frame.fs - pulse.fs) > 1e-9 * pulse.fs:
        raise InvalidInputError("channel data and pulse have different sample rates")
    check_finite("channel data", frame.data)
    return frame


def _thetas(thetas):
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    if thetas.ndim != 1 or thetas.size == 0:
        raise InvalidParameterError("thetas must be a non-empty 1-D sequence")
    if np.any(np.abs(thetas) >= np.pi / 2):
        raise InvalidParameterError("steering angles must satisfy |theta| < pi/2")
    return thetas


class TimeDomainBeamformer(TransformerMixin, BaseEstimator):
    """Dynamic-focus delay-and-sum with the matched filter before or after summation.

    Parameters
    ----------
    geometry : ArrayGeometry
    pulse : CodedPulse
    thetas : array_like
        Steering directions in radians.
    compression : {"pre", "post", "none"}
        Where the matched filter is applied.
    """

    def __init__(self, geometry=None, pulse=None, thetas=(0.0,), compression="pre"):
        self.geometry = geometry
        self.pulse = pulse
        self.thetas = thetas
        self.compression = compression

    def fit(self, X=None, y=None):
        if self.compression not in ("pre", "post", "none"):
            raise InvalidParameterError(f"compression must be 'pre', 'post' or 'none', got {self.compression!r}")
        if self.geometry is None or self.pulse is None:
            raise InvalidParameterError("geometry and pulse are required")
        self.thetas_ = _thetas(self.thetas)
        self.n_elements_ = self.geometry.n_elements
        return self

    def beam_lines(self, X):
        """Beamform ``X`` and return a list of :class:`BeamLine`."""
        check_is_fitted(self, "thetas_")
        frame = _as_frame(X, self.pulse, self.geometry)
        if self.compression == "pre":
            comp = compress_channels(frame, self.pulse)
            return [beamform_pre_compression(frame, self.geometry, th, self.pulse, compressed=comp) for th in self.thetas_]
        if self.compression == "post":
            return [beamform_post_compression(frame, self.geometry, th, self.pulse) for th in self.thetas_]
        return [beamform_time(frame, self.geometry, th) for th in self.thetas_]

    def transform(self, X):
        return np.stack([ln.samples for ln in self.beam_lines(X)])


class FocusBeamformer(TransformerMixin, BaseEstimator):
    """Frequency-domain beamforming with the matched filter folded into the weights.

    Parameters
    ----------
    geometry : ArrayGeometry
    pulse : CodedPulse
    thetas : array_like
        Steering directions in radians.
    n_q : int
        Truncation length; odd for the default symmetric window.
    n1, n2 : int, optional
        Explicit window bounds (override ``n_q``).
    band_threshold_db : float
        Band selection threshold below the matched-filter spectral peak.
    pad : int, optional
        Grid padding, see :func:`compute_channel_spectra`.
    tables : dict, optional
        Pre-built Q tables keyed by angle (for example from a LUT cache);
        angles missing from it are built in ``fit``.

    Attributes
    ----------
    band_ : ndarray
        Output coefficient indices.
    n_grid_ : int
    q_tables_ : list of QTable
        Matched-filter-integrated weights, one per angle.
    """

    def __init__(
        self,
        geometry=None,
        pulse=None,
        thetas=(0.0,),
        n_q=29,
        n1=None,
        n2=None,
        band_threshold_db=40.0,
        pad=None,
        tables=None,
    ):
        self.geometry = geometry
        self.pulse = pulse
        self.thetas = thetas
        self.n_q = n_q
        self.n1 = n1
        self.n2 = n2
        self.band_threshold_db = band_threshold_db
        self.pad = pad
        self.tables = tables

    def _window(self):
        if self.n1 is not None or self.n2 is not None:
            if self.n1 is None or self.n2 is None:
                raise InvalidParameterError("n1 and n2 must be given together")
            return int(self.n1), int(self.n2)
        if int(self.n_q) != self.n_q or self.n_q < 1 or self.n_q % 2 == 0:
            raise InvalidParameterError(f"n_q must be a positive odd integer for a symmetric window, got {self.n_q!r}")
        half = (int(self.n_q) - 1) // 2
        return half, half

    def fit(self, X, y=None):
        """Select the band from ``X`` and build the look-up tables for every angle."""
        if self.geometry is None or self.pulse is None:
            raise InvalidParameterError("geometry and pulse are required")
        n1, n2 = self._window()
        frame = _as_frame(X, self.pulse, self.geometry)
        thetas = _thetas(self.thetas)
        spectra = compute_channel_spectra(frame, self.pulse, self.band_threshold_db, n1, n2, self.pad)
        if spectra.empty:
            raise InvalidInputError("no signal band found: the frame is all zeros")
        h = mf_spectrum(self.pulse, spectra.n_grid)
        given = self.tables or {}
        tables = []
        for th in thetas:
            q = given.get(float(th))
            if q is None:
                q = build_q_table(self.geometry, th, spectra.band, n1, n2, spectra.n_grid, spectra.fs, spectra.n_samples)
            if not q.mf_integrated:
                q = integrate_mf(q, h)
            tables.append(q)
        self.thetas_ = thetas
        self.n1_, self.n2_ = n1, n2
        self.band_ = spectra.band
        self.n_grid_ = spectra.n_grid
        self.n_samples_ = spectra.n_samples
        self.q_tables_ = tables
        return self

    def beam_lines(self, X):
        check_is_fitted(self, "q_tables_")
        frame = _as_frame(X, self.pulse, self.geometry)
        if frame.n_samples != self.n_samples_:
            raise InvalidInputError(f"expected {self.n_samples_} samples per channel, got {frame.n_samples}")
        spectra = compute_channel_spectra(
            frame, self.pulse, n1=self.n1_, n2=self.n2_, pad=self.n_grid_ - frame.n_samples, band=self.band_
        )
        lines = []
        for q in self.q_tables_:
            line = reconstruct_time(focus_beamform(spectra, q), frame.n_samples)
            check_finite("beam line", line.samples)
            lines.append(line)
        return lines

    def transform(self, X):
        return np.stack([ln.samples for ln in self.beam_lines(X)])
