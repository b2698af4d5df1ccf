"""All-pole envelope analysis, inverse filtering and resynthesis filtering.

Autocorrelation method with Levinson recursion over Hanning-windowed frames.
Frame centers sit on the shared analysis grid (one frame every ``hop_s``
seconds, centered at i*hop), so LPC frames align one-to-one with pitch frames.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfiltic

from .audio import AudioBuffer
from .errors import OrderTooHigh

DEGENERATE_ENERGY = 1e-10


def levinson(r: np.ndarray, order: int):
    """Levinson-Durbin recursion on an autocorrelation sequence.

    Returns (a, err, k): monic coefficient vector [1, a1..ap], final prediction
    error, and the reflection coefficients.
    """
    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = float(r[0])
    for i in range(1, order + 1):
        acc = r[i] + np.dot(a[1:i], r[i - 1:0:-1])
        ki = -acc / err
        k[i - 1] = ki
        a[1:i + 1] = a[1:i + 1] + ki * a[i - 1::-1][:i]
        err *= (1.0 - ki * ki)
        if err <= 0:
            err = 0.0
            break
    return a, err, k


def _stabilize(a: np.ndarray) -> np.ndarray:
    """Reflect any pole outside the unit circle back inside."""
    roots = np.roots(a)
    mags = np.abs(roots)
    bad = mags >= 1.0
    if not np.any(bad):
        return a
    roots[bad] = roots[bad] / (mags[bad] ** 2)
    fixed = np.real(np.poly(roots))
    return fixed / fixed[0]


def is_stable(a: np.ndarray, margin: float = 0.0) -> bool:
    return bool(np.all(np.abs(np.roots(a)) < 1.0 - margin))


@dataclass
class LpcEnvelope:
    """Per-frame monic all-pole models with gains on the shared frame grid."""

    order: int
    coefficients: np.ndarray    # (frames, order+1), each row starts with 1
    gain: np.ndarray            # (frames,), >= 0
    frame_hop: float            # seconds
    window_length: int          # samples
    repaired_frames: int = 0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        self.gain = np.asarray(self.gain, dtype=np.float64)
        if self.coefficients.ndim != 2 or self.coefficients.shape[1] != self.order + 1:
            raise OrderTooHigh("coefficient rows must have order+1 entries")

    @property
    def n_frames(self) -> int:
        return self.coefficients.shape[0]


def frame_grid(n_samples: int, hop: int) -> int:
    """Number of frames for a signal: one frame per hop, centered at i*hop."""
    return 1 + (n_samples - 1) // hop


def extract_centered(x: np.ndarray, center: int, length: int) -> np.ndarray:
    """Window of ``length`` samples centered at ``center``, zero-padded at edges."""
    half = length // 2
    lo = center - half
    hi = lo + length
    out = np.zeros(length)
    src_lo = max(lo, 0)
    src_hi = min(hi, len(x))
    if src_hi > src_lo:
        out[src_lo - lo:src_hi - lo] = x[src_lo:src_hi]
    return out


def lpc_analyze(buf: AudioBuffer, track=None, order: int | None = None,
                window_s: float = 0.025, hop_s: float = 0.005) -> LpcEnvelope:
    """Fit a stable all-pole model to every Hanning-windowed frame.

    When a pitch track is given, its hop is reused so envelope frames land on
    the same grid as the pitch frames.
    """
    sr = buf.sample_rate
    if order is None:
        order = sr // 1000 + 2
    if track is not None:
        hop_s = track.frame_hop
    win_len = int(round(window_s * sr))
    if order < 2 or order >= win_len:
        raise OrderTooHigh(f"order {order} invalid for window of {win_len} samples")
    hop = max(1, int(round(hop_s * sr)))
    x = buf.samples
    n_frames = frame_grid(len(x), hop)
    window = np.hanning(win_len)

    frames = np.empty((n_frames, win_len))
    for i in range(n_frames):
        frames[i] = extract_centered(x, i * hop, win_len) * window

    # batched autocorrelation through the power spectrum
    nfft = 1 << int(np.ceil(np.log2(2 * win_len)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acorr = np.fft.irfft(np.abs(spec) ** 2, nfft, axis=1)[:, :order + 1]

    coeffs = np.zeros((n_frames, order + 1))
    coeffs[:, 0] = 1.0
    gain = np.zeros(n_frames)
    repaired = 0
    for i in range(n_frames):
        r = acorr[i]
        if r[0] < DEGENERATE_ENERGY:
            continue  # identity predictor, zero gain
        a, err, k = levinson(r, order)
        if np.any(np.abs(k) >= 1.0) or not np.all(np.isfinite(a)):
            a = _stabilize(np.nan_to_num(a))
            repaired += 1
        coeffs[i] = a
        gain[i] = np.sqrt(max(err, 0.0))
    return LpcEnvelope(order=order, coefficients=coeffs, gain=gain,
                       frame_hop=hop / sr, window_length=win_len,
                       repaired_frames=repaired)


def _frame_of_sample(n_samples: int, hop: int, n_frames: int) -> np.ndarray:
    idx = np.round(np.arange(n_samples) / hop).astype(int)
    return np.clip(idx, 0, n_frames - 1)


def inverse_filter(buf: AudioBuffer, env: LpcEnvelope) -> AudioBuffer:
    """LPC residual: each sample filtered by its nearest frame's A(z)."""
    x = buf.samples
    hop = int(round(env.frame_hop * buf.sample_rate))
    owner = _frame_of_sample(len(x), hop, env.n_frames)
    a_per_sample = env.coefficients[owner]          # (N, order+1)
    pad = np.concatenate([np.zeros(env.order), x])
    residual = np.zeros(len(x))
    for k in range(env.order + 1):
        residual += a_per_sample[:, k] * pad[env.order - k:env.order - k + len(x)]
    return AudioBuffer(samples=residual, sample_rate=buf.sample_rate)


def forward_filter(excitation: np.ndarray, env: LpcEnvelope, sample_rate: int) -> np.ndarray:
    """Run an excitation through the time-varying synthesis filters 1/A(z).

    Exact inverse of :func:`inverse_filter`: block-wise IIR with the output
    history carried across coefficient switches.
    """
    e = np.asarray(excitation, dtype=np.float64)
    hop = int(round(env.frame_hop * sample_rate))
    owner = _frame_of_sample(len(e), hop, env.n_frames)
    y = np.zeros(len(e))
    # contiguous zones that share one coefficient set
    boundaries = np.flatnonzero(np.diff(owner)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(e)]])
    for lo, hi in zip(starts, ends):
        a = env.coefficients[owner[lo]]
        if lo == 0:
            zi = np.zeros(env.order)
        else:
            hist = y[max(0, lo - env.order):lo][::-1]
            if len(hist) < env.order:
                hist = np.concatenate([hist, np.zeros(env.order - len(hist))])
            zi = lfiltic([1.0], a, hist)
        y[lo:hi], _ = lfilter([1.0], a, e[lo:hi], zi=zi)
    return y


def envelope_spectrum(a: np.ndarray, gain: float, n_fft: int) -> np.ndarray:
    """One-sided amplitude response gain/|A(e^jw)| on an n_fft grid."""
    denom = np.abs(np.fft.rfft(a, n_fft))
    return gain / np.maximum(denom, 1e-12)
