"""Coded-excitation ultrasound beamforming toolkit.

Time-domain pre- and post-compression beamformers serve as references for
FoCUS, a frequency-domain beamformer whose Fourier weights also perform the
pulse compression.
"""

from .beamformers import FocusBeamformer, TimeDomainBeamformer
from .exceptions import (
    CacheCollisionError,
    ConfigError,
    InvalidInputError,
    InvalidParameterError,
    MeasurementError,
    NumericalError,
    OutOfBandError,
    StaleLUTError,
)
from .fdbf import (
    BeamSpectrum,
    QTable,
    SpectrumSet,
    build_q_table,
    compute_channel_spectra,
    focus_beamform,
    integrate_mf,
    mf_spectrum,
    reconstruct_time,
)
from .imaging import BModeImage, envelope, scan_convert
from .metrics import ComplexityReport, PsfReport, complexity_model, measure_axial_psf, measure_lateral_psf
from .scene import (
    ArrayGeometry,
    ChannelFrame,
    Phantom,
    Scatterer,
    arrival_time,
    delay_curve,
    synthesize_channels,
    uniform_linear_array,
)
from .tdbf import BeamLine, beamform_post_compression, beamform_pre_compression, beamform_time
from .waveform import AmbiguityMap, CodedPulse, ambiguity, autocorrelation, make_linear_fm, matched_filter

__version__ = "0.1.0"
