"""Averaged-spectrum and tilt-filter behavior."""

import csv

import numpy as np
import pytest
from scipy.signal import lfilter

from vqkit.errors import EmptyFrameSet, GridMismatch, NonFiniteSpectrum, OrderTooHigh
from vqkit.framing import NormalizedFrameSet
from vqkit.tilt import (
    ArModel,
    AveragedSpectrum,
    apply_tilt,
    averaged_spectrum,
    build_tilt_filter,
    fit_ar_to_spectrum,
    write_spectrum_csv,
)

L = 200
SR = 16000
N_BINS = L // 2 + 1


def frame_set(frames):
    return NormalizedFrameSet(frames=np.atleast_2d(np.asarray(frames, float)),
                              frame_length=L, sample_rate=SR, mean_f0=100.0)


def unit_rows(rows):
    rows = np.atleast_2d(rows)
    return rows / np.sqrt(np.sum(rows ** 2, axis=1, keepdims=True))


def model_spectrum(coefs, gain):
    m = ArModel(coefficients=np.asarray(coefs, float), gain=gain)
    return AveragedSpectrum(bins=m.amplitude_spectrum(N_BINS),
                            frame_count=1, frame_length=L)


def test_identical_frames_average_to_single_spectrum():
    rng = np.random.default_rng(1)
    row = rng.standard_normal(L)
    sp = averaged_spectrum(frame_set(np.tile(row, (6, 1))))
    np.testing.assert_allclose(sp.bins, np.abs(np.fft.rfft(row)), rtol=1e-12)
    assert sp.frame_count == 6


def test_two_frame_average_is_elementwise_mean():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal((2, L))
    sp = averaged_spectrum(frame_set(np.vstack([a, b])))
    expect = 0.5 * (np.abs(np.fft.rfft(a)) + np.abs(np.fft.rfft(b)))
    np.testing.assert_allclose(sp.bins, expect, atol=1e-12)


def test_averaging_is_linear_over_concatenation():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, L))
    b = rng.standard_normal((7, L))
    sa = averaged_spectrum(frame_set(a)).bins
    sb = averaged_spectrum(frame_set(b)).bins
    sab = averaged_spectrum(frame_set(np.vstack([a, b]))).bins
    np.testing.assert_allclose(sab, (3 * sa + 7 * sb) / 10, atol=1e-12)


def test_two_cycle_sinusoid_peaks_at_second_bin():
    t = np.arange(L)
    sp = averaged_spectrum(frame_set(np.sin(2 * np.pi * 2 * t / L)))
    assert np.argmax(sp.bins) == 2


def test_empty_frame_set_rejected():
    with pytest.raises(EmptyFrameSet):
        averaged_spectrum(frame_set(np.empty((0, L))))


def test_ar2_fit_recovers_known_model():
    truth = np.array([1.0, -1.2, 0.72])
    fit = fit_ar_to_spectrum(model_spectrum(truth, 0.7), order=2)
    np.testing.assert_allclose(fit.coefficients, truth, atol=1e-3)
    assert abs(fit.gain - 0.7) < 1e-3


def test_flat_spectrum_fits_white_model():
    flat = AveragedSpectrum(bins=np.full(N_BINS, 0.5), frame_count=3,
                            frame_length=L)
    fit = fit_ar_to_spectrum(flat, order=6)
    np.testing.assert_allclose(fit.coefficients[1:], 0.0, atol=1e-9)
    assert abs(fit.gain - 0.5) < 1e-9


def test_spectrum_scaling_moves_gain_not_shape():
    sp = model_spectrum([1.0, -1.2, 0.72], 0.7)
    base = fit_ar_to_spectrum(sp, order=2)
    scaled = fit_ar_to_spectrum(
        AveragedSpectrum(bins=3.0 * sp.bins, frame_count=1, frame_length=L),
        order=2)
    np.testing.assert_allclose(scaled.coefficients, base.coefficients,
                               atol=1e-9)
    assert abs(scaled.gain / base.gain - 3.0) < 1e-9


def test_fit_order_bounds():
    sp = model_spectrum([1.0, -0.5], 1.0)
    with pytest.raises(OrderTooHigh):
        fit_ar_to_spectrum(sp, order=1)
    with pytest.raises(OrderTooHigh):
        fit_ar_to_spectrum(sp, order=L // 2)


def test_zero_energy_spectrum_rejected():
    dead = AveragedSpectrum(bins=np.zeros(N_BINS), frame_count=1,
                            frame_length=L)
    with pytest.raises(NonFiniteSpectrum):
        fit_ar_to_spectrum(dead, order=4)


def test_grid_mismatch_rejected():
    a = model_spectrum([1.0, -0.5], 1.0)
    short = AveragedSpectrum(bins=np.ones(51), frame_count=1, frame_length=100)
    with pytest.raises(GridMismatch):
        build_tilt_filter(a, short, order=4)


def test_identity_tilt_returns_frame():
    rng = np.random.default_rng(4)
    frames = unit_rows(rng.standard_normal((5, L)))
    sp = averaged_spectrum(frame_set(frames))
    filt = build_tilt_filter(sp, sp, order=12)
    for x in frames:
        y = apply_tilt(x, filt)
        err = 10 * np.log10(np.sum((y - x) ** 2) / np.sum(x ** 2))
        assert err < -60.0


def test_tilt_round_trip_restores_frame():
    rng = np.random.default_rng(5)
    x = unit_rows(rng.standard_normal(L))[0]
    spec_a = model_spectrum([1.0, -1.2, 0.72], 0.7)
    spec_b = model_spectrum([1.0, 0.5, 0.3, 0.1], 1.1)
    forward = build_tilt_filter(spec_a, spec_b, order=8)
    backward = build_tilt_filter(spec_b, spec_a, order=8)
    z = apply_tilt(apply_tilt(x, forward), backward)
    err = 10 * np.log10(np.sum((z - x) ** 2) / np.sum(x ** 2))
    assert err < -40.0


def test_transfer_amplitude_maps_source_model_onto_target():
    filt = build_tilt_filter(model_spectrum([1.0, -1.2, 0.72], 0.7),
                             model_spectrum([1.0, 0.5, 0.3, 0.1], 1.1),
                             order=8)
    mapped = filt.source_ar.amplitude_spectrum(N_BINS) \
        * filt.transfer_amplitude(N_BINS)
    target = filt.target_ar.amplitude_spectrum(N_BINS)
    db_err = np.abs(20 * np.log10(mapped / target))
    assert np.max(db_err) < 1e-6


def test_tilt_contracts_spectral_distance_to_target():
    def lsd(a, b):
        a = a / np.sqrt(np.sum(a ** 2))
        b = b / np.sqrt(np.sum(b ** 2))
        r = 20 * np.log10(np.maximum(a, 1e-12) / np.maximum(b, 1e-12))
        return float(np.sqrt(np.mean(r[1:] ** 2)))

    rng = np.random.default_rng(6)
    white = rng.standard_normal((400, L))
    colored = unit_rows(lfilter([0.7], [1.0, -1.2, 0.72], white, axis=1))
    spec_a = averaged_spectrum(frame_set(colored))
    spec_b = model_spectrum([1.0, 0.5, 0.3, 0.1], 1.1)
    filt = build_tilt_filter(spec_a, spec_b, order=8)
    moved = averaged_spectrum(
        frame_set(np.array([apply_tilt(c, filt) for c in colored])))
    assert lsd(moved.bins, spec_b.bins) < lsd(spec_a.bins, spec_b.bins)
    assert lsd(moved.bins, spec_b.bins) < 1.0


def test_brighter_target_raises_high_band_energy():
    rng = np.random.default_rng(7)
    dark = AveragedSpectrum(bins=np.linspace(1.0, 0.2, N_BINS),
                            frame_count=1, frame_length=L)
    bright = AveragedSpectrum(bins=np.linspace(0.2, 1.0, N_BINS),
                              frame_count=1, frame_length=L)
    filt = build_tilt_filter(dark, bright, order=8)
    dark_model = fit_ar_to_spectrum(dark, order=8)
    frames = unit_rows(lfilter([1.0], dark_model.coefficients,
                               rng.standard_normal((50, L)), axis=1))

    def high_fraction(rows):
        mag2 = np.abs(np.fft.rfft(rows, axis=1)) ** 2
        return float(np.sum(mag2[:, N_BINS // 2:]) / np.sum(mag2))

    shifted = np.array([apply_tilt(f, filt) for f in frames])
    assert high_fraction(shifted) > high_fraction(frames) + 0.1


def test_tilt_impulse_response_decays():
    filt = build_tilt_filter(model_spectrum([1.0, -1.2, 0.72], 0.7),
                             model_spectrum([1.0, 0.5, 0.3, 0.1], 1.1),
                             order=8)
    imp = np.zeros(10 * filt.order + 1)
    imp[0] = 1.0
    resp = lfilter(filt.source_ar.coefficients,
                   filt.target_ar.coefficients, imp)
    assert abs(resp[-1]) < 1e-6


def test_apply_tilt_output_has_unit_energy():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(L)
    filt = build_tilt_filter(model_spectrum([1.0, -1.2, 0.72], 0.7),
                             model_spectrum([1.0, 0.5, 0.3, 0.1], 1.1),
                             order=8)
    assert abs(np.sum(apply_tilt(x, filt) ** 2) - 1.0) < 1e-12


def test_spectrum_csv_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    sp = averaged_spectrum(frame_set(rng.standard_normal((4, L))))
    path = tmp_path / "spec.csv"
    write_spectrum_csv(sp, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin", "amplitude"]
    got = np.array([float(r[1]) for r in rows[1:]])
    np.testing.assert_array_equal(got, sp.bins)
    assert [int(r[0]) for r in rows[1:]] == list(range(N_BINS))
