"""Averaged spectra of pitch-normalized frames and the tilt-transfer filter.

Frames on the fixed normalized grid are averaged in the amplitude-spectrum
domain, each average is summarized by a low-order all-pole model, and a pair
of such models forms a ratio filter: inverse-filter by the source model,
forward-filter by the target model. Because both models are minimum-phase the
ratio and its inverse are stable.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import (
    EmptyFrameSet,
    GridMismatch,
    NonFiniteSpectrum,
    OrderTooHigh,
)
from .framing import NormalizedFrameSet
from .lpc import _stabilize, is_stable, levinson

TILT_ORDER = 20


@dataclass
class AveragedSpectrum:
    """Mean one-sided amplitude spectrum over a set of normalized frames."""

    bins: np.ndarray       # linear amplitudes, length frame_length//2 + 1
    frame_count: int
    frame_length: int

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.float64)
        if self.frame_count < 1:
            raise EmptyFrameSet("averaged spectrum needs at least one frame")
        if len(self.bins) != self.frame_length // 2 + 1:
            raise ValueError("bin grid must match one-sided frame spectrum")
        if not np.all(np.isfinite(self.bins)) or np.any(self.bins < 0):
            raise NonFiniteSpectrum("amplitude bins must be finite and >= 0")


@dataclass
class ArModel:
    """Monic all-pole model: amplitude spectrum = gain / |A(e^jw)|."""

    coefficients: np.ndarray   # [1, a1..ap]
    gain: float

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def amplitude_spectrum(self, n_bins: int) -> np.ndarray:
        """Model amplitude on n_bins one-sided points over [0, pi]."""
        omega = np.pi * np.arange(n_bins) / (n_bins - 1)
        z = np.exp(-1j * np.outer(omega, np.arange(self.order + 1)))
        denom = np.abs(z @ self.coefficients)
        return self.gain / np.maximum(denom, 1e-300)


@dataclass
class TiltFilter:
    """Ratio filter between two all-pole spectral summaries."""

    source_ar: ArModel
    target_ar: ArModel
    order: int

    def __post_init__(self):
        if not (is_stable(self.source_ar.coefficients)
                and is_stable(self.target_ar.coefficients)):
            raise ValueError("tilt filter requires stable models on both sides")

    def transfer_amplitude(self, n_bins: int) -> np.ndarray:
        src = self.source_ar.amplitude_spectrum(n_bins)
        return self.target_ar.amplitude_spectrum(n_bins) / np.maximum(src, 1e-300)


def averaged_spectrum(frames: NormalizedFrameSet) -> AveragedSpectrum:
    """Element-wise mean of the frames' one-sided amplitude spectra."""
    if frames.n_frames == 0:
        raise EmptyFrameSet("no frames to average")
    mags = np.abs(np.fft.rfft(frames.frames, axis=1))
    return AveragedSpectrum(bins=mags.mean(axis=0),
                            frame_count=frames.n_frames,
                            frame_length=frames.frame_length)


def fit_ar_to_spectrum(spec: AveragedSpectrum, order: int = TILT_ORDER) -> ArModel:
    """All-pole summary of an averaged spectrum.

    The squared amplitude spectrum is inverse-transformed to an
    autocorrelation sequence and passed through the Levinson recursion, so the
    model matches the spectrum in the least-squares sense of the
    autocorrelation method.
    """
    if order < 2 or order >= spec.frame_length // 2:
        raise OrderTooHigh(f"tilt order {order} invalid for frame length "
                           f"{spec.frame_length}")
    if not np.all(np.isfinite(spec.bins)):
        raise NonFiniteSpectrum("averaged spectrum contains non-finite bins")
    power = spec.bins ** 2
    r = np.fft.irfft(power, spec.frame_length)[:order + 1]
    if r[0] <= 1e-300:
        raise NonFiniteSpectrum("averaged spectrum carries no energy")
    a, err, k = levinson(r, order)
    if np.any(np.abs(k) >= 1.0) or not np.all(np.isfinite(a)):
        a = _stabilize(np.nan_to_num(a))
        err = abs(err)
    return ArModel(coefficients=a, gain=float(np.sqrt(max(err, 0.0))))


def build_tilt_filter(source: AveragedSpectrum, target: AveragedSpectrum,
                      order: int = TILT_ORDER) -> TiltFilter:
    """Fit both spectra and pair the models into a ratio filter."""
    if source.frame_length != target.frame_length:
        raise GridMismatch("source and target spectra live on different grids")
    return TiltFilter(source_ar=fit_ar_to_spectrum(source, order),
                      target_ar=fit_ar_to_spectrum(target, order),
                      order=order)


def apply_tilt(frame: np.ndarray, filt: TiltFilter) -> np.ndarray:
    """Run one normalized-domain frame through the ratio, re-normalized.

    Whitening by the source model is a plain FIR pass; coloring by the target
    model is the matching IIR pass. The result is rescaled to unit energy:
    tilt shapes the spectrum, the energy contour is restored downstream.
    """
    x = np.asarray(frame, dtype=np.float64)
    y = lfilter(filt.source_ar.coefficients, [1.0], x)
    y = lfilter([1.0], filt.target_ar.coefficients, y)
    energy = np.sqrt(np.sum(y ** 2))
    if energy > 0:
        y = y / energy
    return y


def write_spectrum_csv(spec: AveragedSpectrum, path) -> None:
    """Two-column bin/amplitude export for plotting."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "amplitude"])
        for i, amp in enumerate(spec.bins):
            writer.writerow([i, repr(float(amp))])
