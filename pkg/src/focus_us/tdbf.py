"""Time-domain dynamic-focus delay-and-sum beamforming.

These are the reference implementations FoCUS is checked against: matched
filtering before beamforming (every channel filtered) and after beamforming
(one filter on the summed line).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .scene import _delay, beam_end_time
from .validation import check_channel_matrix
from .waveform import apply_matched_filter

TAGS = ("uncoded", "pre-compression", "post-compression", "focus")


@dataclass(frozen=True)
class BeamLine:
    """One beamformed scan line sampled at ``fs`` from beam time 0."""

    theta: float
    samples: np.ndarray = field(repr=False)
    fs: float
    tag: str = "uncoded"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InvalidInputError(f"unknown beam line tag {self.tag!r}")

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def t(self):
        return np.arange(self.n_samples) / self.fs


def _check_frame(frame, geometry):
    data = check_channel_matrix(frame.data, geometry.n_elements)
    return data


def delay_and_sum(data, fs, geometry, theta, T=None):
    """Average the channels after sampling each at ``tau_m(t; theta)``.

    Off-grid samples use linear interpolation; times outside a channel's
    record contribute zero and the line is zeroed from ``T_B(theta)`` on.
    """
    data = check_channel_matrix(data, geometry.n_elements)
    M, n_s = data.shape
    if T is None:
        T = n_s / fs
    t = np.arange(n_s) / fs
    t_end = beam_end_time(geometry, theta, T)
    grid = np.arange(n_s)
    out = np.zeros(n_s)
    for m, gamma in enumerate(geometry.gammas):
        idx = _delay(t, gamma, theta) * fs
        out += np.interp(idx, grid, data[m], left=0.0, right=0.0)
    out /= M
    out[t >= t_end] = 0.0
    return out


def beamform_time(frame, geometry, theta, tag="uncoded"):
    """Dynamic-focus delay-and-sum of a :class:`ChannelFrame` along ``theta``."""
    data = _check_frame(frame, geometry)
    samples = delay_and_sum(data, frame.fs, geometry, theta, frame.T)
    return BeamLine(theta=float(theta), samples=samples, fs=frame.fs, tag=tag)


def compress_channels(frame, pulse):
    """Matched-filter every channel; a pulse starting at sample ``d`` peaks at ``d``."""
    return apply_matched_filter(np.asarray(frame.data, dtype=np.float64), pulse)


def beamform_pre_compression(frame, geometry, theta, pulse, compressed=None):
    """Matched filter on every channel, then delay-and-sum.

    ``compressed`` may carry the output of :func:`compress_channels` so the
    per-channel filtering is shared between scan lines.
    """
    _check_frame(frame, geometry)
    if compressed is None:
        compressed = compress_channels(frame, pulse)
    samples = delay_and_sum(np.real(compressed), frame.fs, geometry, theta, frame.T)
    return BeamLine(theta=float(theta), samples=samples, fs=frame.fs, tag="pre-compression")


def beamform_post_compression(frame, geometry, theta, pulse):
    """Delay-and-sum of the raw channels followed by a single matched filter."""
    line = beamform_time(frame, geometry, theta)
    samples = np.real(apply_matched_filter(line.samples, pulse))
    return BeamLine(theta=float(theta), samples=samples, fs=frame.fs, tag="post-compression")
