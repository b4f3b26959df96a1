import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from focus_us.exceptions import InvalidParameterError, MeasurementError
from focus_us.metrics import (
    COMPLEXITY_COLUMNS,
    PSF_COLUMNS,
    MultiplicationCounter,
    PsfReport,
    complexity_model,
    count_focus_multiplications,
    count_pre_compression_multiplications,
    measure_axial_psf,
    measure_lateral_psf,
    read_csv,
    scaled_sizes,
    write_complexity_csv,
    write_psf_csv,
)
from focus_us.tdbf import BeamLine

FS = 40e6


def _sinc_line(B=2e6, f0=5e6, t0=20e-6, n=1600, amp=1.0):
    t = np.arange(n) / FS
    x = amp * np.sinc(B * (t - t0)) * np.cos(2 * np.pi * f0 * (t - t0))
    return BeamLine(theta=0.0, samples=x, fs=FS, tag="pre-compression")


def test_sinc_width_and_first_sidelobe():
    r = measure_axial_psf(_sinc_line())
    # half-power width of sinc(Bt) is 0.8859 / B; first sidelobe at -13.26 dB
    assert r.axial_width_s == pytest.approx(0.8859 / 2e6, rel=0.01)
    assert r.first_sidelobe_db == pytest.approx(-13.26, abs=0.3)
    assert r.depth_mm == pytest.approx(1e3 * 1540 * 20e-6 / 2, rel=1e-3)
    assert r.axial_width_mm == pytest.approx(1e3 * 1540 * r.axial_width_s / 2)
    assert r.method == "pre-compression"


@given(amp=st.floats(1e-3, 1e3))
def test_measurements_amplitude_invariant(amp):
    a = measure_axial_psf(_sinc_line())
    b = measure_axial_psf(_sinc_line(amp=amp))
    assert b.axial_width_s == pytest.approx(a.axial_width_s, rel=1e-9)
    assert b.peak_sidelobe_db == pytest.approx(a.peak_sidelobe_db, abs=1e-9)


def test_window_restricts_search():
    line = _sinc_line()
    x = line.samples.copy()
    x[100] = 50.0  # strong spike outside the window
    r = measure_axial_psf(BeamLine(0.0, x, FS, "focus"), window=(600, 1000))
    # the spike's analytic-signal tail may move the peak by one sample
    assert abs(r.depth_mm - 1e3 * 1540 * 20e-6 / 2) <= 1e3 * 1540 / (2 * FS) + 1e-9


def test_peak_below_noise_floor():
    with pytest.raises(MeasurementError):
        measure_axial_psf(_sinc_line(amp=1e-3), noise_floor=1.0)


def test_non_finite_line_rejected():
    x = _sinc_line().samples.copy()
    x[5] = np.nan
    with pytest.raises(MeasurementError):
        measure_axial_psf(x)


def test_report_rejects_nonpositive_width():
    with pytest.raises(MeasurementError):
        PsfReport(axial_width_s=0.0)
    merged = PsfReport(method="focus", axial_width_s=1.0).merge(PsfReport(lateral_width_rad=0.1))
    assert (merged.method, merged.axial_width_s, merged.lateral_width_rad) == ("focus", 1.0, 0.1)


def _fan(thetas, center, width, depth_mm=30.0, c=1540.0):
    n = 2000
    i = int(round(2 * depth_mm * 1e-3 / c * FS))
    lines = []
    for th in thetas:
        x = np.zeros(n)
        x[i - 20 : i + 21] = np.exp(-((th - center) ** 2) / (2 * width**2)) * np.hanning(41) * np.cos(np.arange(41))
        lines.append(BeamLine(th, x, FS, "focus"))
    return lines


def test_lateral_gaussian_width():
    thetas = np.linspace(-0.2, 0.2, 81)
    lines = _fan(thetas, 0.02, 0.03)
    r = measure_lateral_psf(lines, 30.0)
    assert r.lateral_width_rad == pytest.approx(2 * 0.03 * math.sqrt(math.log(2)), rel=0.02)
    assert r.lateral_width_mm == pytest.approx(r.lateral_width_rad * 30.0)


def test_lateral_span_separates_neighbours():
    thetas = np.linspace(-0.2, 0.2, 81)
    a, b = _fan(thetas, -0.1, 0.02), _fan(thetas, 0.1, 0.04)
    lines = [BeamLine(x.theta, 0.5 * x.samples + y.samples, FS, "focus") for x, y in zip(a, b)]
    left = measure_lateral_psf(lines, 30.0, theta_span=(-0.2, 0.0))
    right = measure_lateral_psf(lines, 30.0, theta_span=(0.0, 0.2))
    assert left.lateral_width_rad == pytest.approx(2 * 0.02 * math.sqrt(math.log(2)), rel=0.03)
    assert right.lateral_width_rad == pytest.approx(2 * 0.04 * math.sqrt(math.log(2)), rel=0.03)


def test_lateral_requires_bracketing():
    thetas = np.linspace(-0.2, 0.2, 21)
    with pytest.raises(MeasurementError):
        measure_lateral_psf(_fan(thetas, 0.4, 0.03), 30.0)


def test_complexity_frozen_example():
    r = complexity_model(64, 1392, 274, 260, 29)
    L = 1392 + 274
    assert r.Na == round(64 * 260 * 29 + 696 * math.log2(1392))
    assert r.Nb == round(64 * 1392 + 64 * (1.5 * L * math.log2(L) + L))
    assert r.ratio == pytest.approx(r.Nb / r.Na)
    assert r.Na == pytest.approx(4.90e5, rel=0.005)
    assert r.Nb == pytest.approx(1.91e6, rel=0.005)


@given(N_q=st.integers(1, 60), P=st.floats(1, 20))
def test_ratio_strictly_decreasing_in_truncation(N_q, P):
    N_s, N_h = scaled_sizes(P, 120e-6, 2.9e6, 60)
    assert complexity_model(64, N_s, N_h, 260, N_q + 1).ratio < complexity_model(64, N_s, N_h, 260, N_q).ratio


@given(
    M=st.integers(1, 256),
    N_s=st.integers(16, 20000),
    N_h=st.integers(1, 2000),
    K=st.integers(1, 2000),
    N_q=st.integers(1, 61),
    base=st.sampled_from(["2", "e"]),
)
def test_saved_equals_pre_minus_post(M, N_s, N_h, K, N_q, base):
    r = complexity_model(M, N_s, N_h, K, N_q, base)
    L = N_s + N_h
    log = math.log2 if base == "2" else math.log
    post = M * N_s + 1.5 * L * log(L) + L
    assert abs(r.Nb - post - r.Nsaved) <= 1.5


@given(N_q=st.integers(1, 60), M=st.integers(1, 128))
def test_focus_cost_increases_with_truncation(N_q, M):
    assert complexity_model(M, 1400, 300, 300, N_q + 1).Na > complexity_model(M, 1400, 300, 300, N_q).Na


@given(P=st.floats(1, 20))
def test_costs_grow_with_oversampling(P):
    a = complexity_model(64, *scaled_sizes(P, 120e-6, 2.9e6, 60), K=260, N_q=29)
    b = complexity_model(64, *scaled_sizes(P * 1.5, 120e-6, 2.9e6, 60), K=260, N_q=29)
    assert b.Nb > a.Nb and b.Na >= a.Na and b.ratio > a.ratio


def test_scaled_sizes():
    assert scaled_sizes(4, 120e-6, 2.9e6, 60) == (1392, 240)


def test_complexity_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        complexity_model(64, 1392, 274, 260, 29, log_base="10")
    with pytest.raises(InvalidParameterError):
        complexity_model(0, 1392, 274, 260, 29)


def test_counted_fft_is_correct(rng):
    x = rng.standard_normal((3, 64)) + 1j * rng.standard_normal((3, 64))
    cnt = MultiplicationCounter()
    np.testing.assert_allclose(cnt.fft(x), np.fft.fft(x), atol=1e-10)
    assert cnt.count == 3 * 32 * 6
    np.testing.assert_allclose(cnt.fft(np.fft.fft(x), inverse=True), x, atol=1e-12)


@pytest.mark.parametrize("M, N_s, N_h, K, N_q", [(16, 512, 100, 80, 9), (64, 1392, 274, 260, 29)])
def test_instrumented_counts_within_factor_two(M, N_s, N_h, K, N_q):
    model = complexity_model(M, N_s, N_h, K, N_q)
    na = count_focus_multiplications(M, N_s, K, N_q)
    nb = count_pre_compression_multiplications(M, N_s, N_h)
    assert 0.5 <= na / model.Na <= 2
    assert 0.5 <= nb / model.Nb <= 2


def test_csv_columns_and_order(tmp_path):
    reports = [PsfReport(method="focus", depth_mm=10.0, axial_width_s=1e-7, n_q=9), PsfReport(method="pre")]
    write_psf_csv(reports, tmp_path / "psf.csv")
    header = (tmp_path / "psf.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == PSF_COLUMNS
    rows = read_csv(tmp_path / "psf.csv")
    assert rows[0]["n_q"] == "9" and float(rows[0]["axial_width_s"]) == 1e-7 and rows[1]["depth_mm"] == ""

    write_complexity_csv([complexity_model(64, 1392, 274, 260, 29, P=4.0)], tmp_path / "cx.csv")
    rows = read_csv(tmp_path / "cx.csv")
    assert tuple(rows[0]) == COMPLEXITY_COLUMNS
    assert rows[0]["P"] == "4" and rows[0]["log_base"] == "2"
