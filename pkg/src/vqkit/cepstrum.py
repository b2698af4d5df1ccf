"""Complex cepstrum and mixed-phase decomposition of windowed speech frames.

The anticausal (negative-quefrency) part of the complex cepstrum captures the
glottal open phase; the causal part plus the quefrency-zero gain captures the
vocal tract and return phase. Splitting the cepstrum by quefrency sign and
transforming back therefore separates source from filter without any model
fitting.

Phase handling is the delicate part: the frame's dominant peak is circularly
shifted to the origin before the transform, the remaining linear phase is
measured at Nyquist and removed as an integer ramp, and any leftover endpoint
residual marks the unwrap as failed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PhaseUnwrapFailure, ZeroFrame

MIN_PADDED_LENGTH = 4096


def _padded_length(frame_length: int) -> int:
    n = MIN_PADDED_LENGTH
    while n < 4 * frame_length:
        n *= 2
    return n


def _phase_ramp(n: int, ndelay: int) -> np.ndarray:
    """Full-length antisymmetric linear-phase ramp worth ndelay samples."""
    half = np.pi * ndelay * np.arange(n // 2 + 1) / (n // 2)
    ramp = np.empty(n)
    ramp[:n // 2 + 1] = half
    ramp[n // 2 + 1:] = -half[n // 2 - 1:0:-1]
    return ramp


@dataclass
class ComplexCepstrum:
    """Real cepstrum buffer plus everything needed to invert it exactly."""

    cepstrum: np.ndarray   # length n_fft
    n_fft: int
    frame_length: int
    shift: int             # circular shift that moved the frame peak to 0
    ndelay: int            # integer linear-phase delay removed after shifting
    sign: float            # +-1 factored out of the spectrum before log


def complex_cepstrum(frame: np.ndarray, n_fft: int | None = None) -> ComplexCepstrum:
    """Complex cepstrum of a windowed frame.

    Raises ZeroFrame for silent input and PhaseUnwrapFailure when the phase
    cannot be unwrapped to a clean endpoint (callers skip such frames).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1 or len(frame) == 0:
        raise ZeroFrame("frame must be a non-empty 1-d array")
    if not np.any(frame):
        raise ZeroFrame("frame is identically zero")
    n = n_fft or _padded_length(len(frame))
    if n < max(64, len(frame)):
        raise ValueError("n_fft too small for this frame")

    shift = int(np.argmax(np.abs(frame)))
    x = np.zeros(n)
    x[:len(frame)] = frame
    x = np.roll(x, -shift)

    spec = np.fft.fft(x)
    sign = 1.0
    if spec[0].real < 0:
        spec = -spec
        sign = -1.0

    mag = np.abs(spec)
    if not np.all(mag > 0):
        raise PhaseUnwrapFailure("spectrum has zero-magnitude bins")
    logmag = np.log(mag)

    half = np.unwrap(np.angle(spec[:n // 2 + 1]))
    ndelay = int(round(half[n // 2] / np.pi))
    half -= np.pi * ndelay * np.arange(n // 2 + 1) / (n // 2)
    if abs(half[n // 2]) > np.pi / 4:
        raise PhaseUnwrapFailure(
            f"endpoint phase residual {half[n // 2]:.3f} rad after ramp removal"
        )

    phase = np.empty(n)
    phase[:n // 2 + 1] = half
    phase[n // 2 + 1:] = -half[n // 2 - 1:0:-1]

    ceps = np.fft.ifft(logmag + 1j * phase).real
    if not np.all(np.isfinite(ceps)):
        raise PhaseUnwrapFailure("non-finite cepstrum")
    return ComplexCepstrum(cepstrum=ceps, n_fft=n, frame_length=len(frame),
                           shift=shift, ndelay=ndelay, sign=sign)


def inverse_complex_cepstrum(cc: ComplexCepstrum) -> np.ndarray:
    """Exact inverse: back to the original frame (trailing zeros dropped)."""
    log_spec = np.fft.fft(cc.cepstrum)
    log_spec += 1j * _phase_ramp(cc.n_fft, cc.ndelay)
    spec = cc.sign * np.exp(log_spec)
    x = np.fft.ifft(spec).real
    x = np.roll(x, cc.shift)
    return x[:cc.frame_length]


@dataclass
class CepstralDecomposition:
    """Mixed-phase split of one GCI-centered frame.

    max_phase and min_phase are full circular buffers in FFT layout: index 0
    is the GCI-aligned origin and negative times wrap to the top end. Their
    circular convolution reproduces the analyzed frame.
    """

    max_phase: np.ndarray
    min_phase: np.ndarray
    n_fft: int
    frame_length: int
    shift: int
    gci_index: int = 0
    t0: float = 0.0            # local pitch period, seconds
    sample_rate: int = 0
    window: np.ndarray | None = None   # taper applied to the analyzed frame

    def reconstruction(self) -> np.ndarray:
        """Circular convolution of the parts, re-aligned to the input frame."""
        spec = np.fft.fft(self.max_phase) * np.fft.fft(self.min_phase)
        x = np.fft.ifft(spec).real
        return np.roll(x, self.shift)[:self.frame_length]

    def anticausal_energy_fraction(self) -> float:
        e = self.max_phase ** 2
        n = self.n_fft
        anti = e[0] + e[n // 2 + 1:].sum()
        return float(anti / max(e.sum(), 1e-300))

    def open_phase_cycle(self) -> np.ndarray:
        """Glottal flow derivative over one period ending at the GCI origin.

        Samples cover times -(P-1)..0. The cepstral factorization fixes
        max_phase[0] = +1, which inverts the waveform whenever the true
        closure sample is negative, so the cycle is re-signed to put its
        dominant excursion (the closing peak) below zero.
        """
        period = int(round(self.t0 * self.sample_rate))
        if period < 4 or period >= self.n_fft // 2:
            raise ValueError("decomposition lacks a usable local period")
        cyc = np.concatenate([self.max_phase[-(period - 1):],
                              self.max_phase[:1]])
        if cyc[np.argmax(np.abs(cyc))] > 0:
            cyc = -cyc
        return cyc


def mixed_phase_decompose(frame: np.ndarray, gci_index: int = 0,
                          t0: float = 0.0, sample_rate: int = 0,
                          window: np.ndarray | None = None,
                          n_fft: int | None = None) -> CepstralDecomposition:
    """Split a GCI-centered windowed frame into anticausal and causal parts.

    Quefrency 0 (overall gain) goes to the minimum-phase side, so max_phase
    keeps only shape. Propagates ZeroFrame / PhaseUnwrapFailure.
    """
    cc = complex_cepstrum(frame, n_fft)
    n = cc.n_fft
    c_min = np.zeros(n)
    c_min[:n // 2 + 1] = cc.cepstrum[:n // 2 + 1]
    c_max = np.zeros(n)
    c_max[n // 2 + 1:] = cc.cepstrum[n // 2 + 1:]

    min_spec = cc.sign * np.exp(np.fft.fft(c_min) + 1j * _phase_ramp(n, cc.ndelay))
    max_spec = np.exp(np.fft.fft(c_max))
    return CepstralDecomposition(
        max_phase=np.fft.ifft(max_spec).real,
        min_phase=np.fft.ifft(min_spec).real,
        n_fft=n,
        frame_length=cc.frame_length,
        shift=cc.shift,
        gci_index=gci_index,
        t0=t0,
        sample_rate=sample_rate,
        window=window,
    )
