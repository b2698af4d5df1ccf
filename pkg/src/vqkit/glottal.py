"""Glottal source features from mixed-phase decompositions.

Per cycle: the glottal formant frequency (dominant low band peak of the flow
derivative spectrum), the normalized amplitude quotient (closing phase) and
the quasi-open quotient (open phase). The anticausal component of the
decomposition is read as the glottal flow derivative over one period ending
at the GCI; flow is its cumulative sum with the endpoint line removed.
"""

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .cepstrum import CepstralDecomposition, mixed_phase_decompose
from .errors import (
    DegenerateFlow,
    NoPeakFound,
    PhaseUnwrapFailure,
    ZeroFrame,
)
from .pitch import AnalysisTrack

FG_SEARCH_MULTIPLE = 4.0      # Fg searched in (0, 4*F0]
FG_FFT_LENGTH = 32768


@dataclass
class GlottalCycleFeatures:
    """One glottal cycle's source features."""

    fg: float             # Hz
    fg_over_f0: float
    naq: float
    qoq: float
    t0: float             # seconds
    gci_index: int = 0
    time_s: float = 0.0

    def __post_init__(self):
        if not (self.fg > 0 and 0 < self.naq < 1 and 0 < self.qoq <= 1):
            raise ValueError("glottal features out of range")


def _flow_cycle(dec: CepstralDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """(derivative, flow) over one period; flow endpoints pinned to zero."""
    deriv = dec.open_phase_cycle()
    flow = np.cumsum(deriv)
    n = len(flow)
    line = flow[0] + (flow[-1] - flow[0]) * np.arange(n) / (n - 1)
    return deriv, flow - line


def estimate_glottal_formant(dec: CepstralDecomposition) -> float:
    """Frequency of the dominant flow-derivative spectral peak below 4*F0."""
    deriv, _ = _flow_cycle(dec)
    sr = dec.sample_rate
    f0 = 1.0 / dec.t0
    mag = np.abs(np.fft.rfft(deriv, FG_FFT_LENGTH))
    hi = int(np.floor(FG_SEARCH_MULTIPLE * f0 * FG_FFT_LENGTH / sr))
    hi = min(hi, len(mag) - 2)
    if hi < 2 or not np.any(mag[1:hi + 1] > 0):
        raise NoPeakFound("no spectral energy below the Fg search limit")
    j = 1 + int(np.argmax(mag[1:hi + 1]))
    if mag[j] < mag[j + 1] or mag[j] < mag[j - 1]:
        raise NoPeakFound("spectrum has no interior maximum below 4*F0")
    # parabolic refinement on the log spectrum
    lm, l0, lp = np.log(np.maximum(mag[j - 1:j + 2], 1e-300))
    denom = lm - 2 * l0 + lp
    delta = 0.5 * (lm - lp) / denom if abs(denom) > 1e-12 else 0.0
    return (j + float(np.clip(delta, -0.5, 0.5))) * sr / FG_FFT_LENGTH


def compute_naq(dec: CepstralDecomposition) -> float:
    """Peak-to-peak flow over (closing-peak magnitude times period)."""
    deriv, flow = _flow_cycle(dec)
    d_min = float(np.min(deriv))
    if d_min >= 0:
        raise DegenerateFlow("flow derivative never negative: no closing phase")
    amplitude = float(np.ptp(flow))
    if amplitude <= 0:
        raise DegenerateFlow("flow cycle has no amplitude")
    return amplitude / (abs(d_min) * len(deriv))


def compute_qoq(dec: CepstralDecomposition) -> float:
    """Fraction of the period the flow spends above half its swing."""
    _, flow = _flow_cycle(dec)
    if not np.all(np.isfinite(flow)) or len(flow) == 0:
        raise DegenerateFlow("flow cycle unusable")
    lo = float(np.min(flow))
    threshold = lo + 0.5 * float(np.ptp(flow))
    return float(np.count_nonzero(flow >= threshold)) / len(flow)


def analyze_cycle(dec: CepstralDecomposition) -> GlottalCycleFeatures:
    """All per-cycle features; propagates NoPeakFound / DegenerateFlow."""
    fg = estimate_glottal_formant(dec)
    naq = compute_naq(dec)
    qoq = compute_qoq(dec)
    return GlottalCycleFeatures(
        fg=fg, fg_over_f0=fg * dec.t0, naq=naq, qoq=qoq, t0=dec.t0,
        gci_index=dec.gci_index,
        time_s=dec.gci_index / dec.sample_rate if dec.sample_rate else 0.0,
    )


DROP_REASONS = ("edge", "unvoiced", "zero_frame", "phase_unwrap",
                "no_peak", "degenerate_flow", "out_of_range")


def extract_cycle_features(buf: AudioBuffer, track: AnalysisTrack,
                           ) -> tuple[list[GlottalCycleFeatures], dict]:
    """Per-cycle glottal features for every usable GCI of an utterance.

    Returns (features, tallies); tallies account for every dropped cycle so
    len(features) + sum(tallies.values()) == len(track.gci).
    """
    sr = buf.sample_rate
    x = buf.samples
    hop = int(round(track.frame_hop * sr))
    tallies = {reason: 0 for reason in DROP_REASONS}
    feats: list[GlottalCycleFeatures] = []

    for g in track.gci:
        fi = int(np.clip(round(g / hop), 0, track.n_frames - 1))
        if not track.voiced[fi]:
            tallies["unvoiced"] += 1
            continue
        f0 = track.f0[fi]
        period = sr / f0
        length = 2 * int(round(period))
        lo = g - length // 2
        if lo < 0 or lo + length > len(x) or length < 8:
            tallies["edge"] += 1
            continue
        window = np.blackman(length)
        frame = x[lo:lo + length] * window
        try:
            dec = mixed_phase_decompose(frame, gci_index=int(g), t0=1.0 / f0,
                                        sample_rate=sr, window=window)
        except ZeroFrame:
            tallies["zero_frame"] += 1
            continue
        except PhaseUnwrapFailure:
            tallies["phase_unwrap"] += 1
            continue
        try:
            feats.append(analyze_cycle(dec))
        except NoPeakFound:
            tallies["no_peak"] += 1
        except DegenerateFlow:
            tallies["degenerate_flow"] += 1
        except ValueError:
            tallies["out_of_range"] += 1
    return feats, tallies
