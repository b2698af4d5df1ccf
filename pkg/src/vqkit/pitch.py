"""Normalized-autocorrelation pitch tracking with octave-error correction.

Frames sit on the shared analysis grid (centers at i*hop). A frame is voiced
when its normalized autocorrelation peak clears the voicing threshold and the
frame is not silent.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .errors import SignalTooShort
from .lpc import extract_centered, frame_grid

SILENCE_RMS = 1e-5


@dataclass
class AnalysisTrack:
    """Per-frame F0/voicing plus GCI sample positions."""

    frame_hop: float                 # seconds
    f0: np.ndarray                   # Hz, 0 on unvoiced frames
    voiced: np.ndarray               # bool per frame
    gci: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    mean_t0: float = 0.0             # seconds, mean 1/f0 over voiced frames
    flags: tuple = ()

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        self.gci = np.asarray(self.gci, dtype=int)

    @property
    def n_frames(self) -> int:
        return len(self.f0)

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.frame_hop

    def frame_at_time(self, t: float) -> int:
        return int(np.clip(round(t / self.frame_hop), 0, self.n_frames - 1))

    def f0_at_sample(self, n: int, sample_rate: int) -> float:
        return float(self.f0[self.frame_at_time(n / sample_rate)])

    def validate(self, n_samples: int | None = None) -> None:
        if np.any((self.f0 > 0) != self.voiced):
            raise ValueError("f0 > 0 must coincide with voiced flags")
        if len(self.gci) and np.any(np.diff(self.gci) <= 0):
            raise ValueError("gci indices must be strictly increasing")
        if n_samples is not None and len(self.gci):
            if self.gci[0] < 0 or self.gci[-1] >= n_samples:
                raise ValueError("gci outside signal")


def _parabolic(y: np.ndarray, i: int) -> float:
    """Sub-sample peak refinement around index i."""
    if i <= 0 or i >= len(y) - 1:
        return float(i)
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if abs(denom) < 1e-12:
        return float(i)
    delta = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(i) + float(np.clip(delta, -0.5, 0.5))


def estimate_pitch(buf: AudioBuffer, f_min: float = 60.0, f_max: float = 400.0,
                   hop_s: float = 0.005, voicing_threshold: float = 0.5) -> AnalysisTrack:
    """Per-frame F0 and voicing decisions.

    Raises SignalTooShort when the buffer is less than two analysis windows.
    """
    sr = buf.sample_rate
    if f_min < 50.0:
        f_min = 50.0
    lag_min = max(2, int(np.floor(sr / f_max)))
    lag_max = int(np.ceil(sr / f_min))
    win = 2 * lag_max
    if len(buf.samples) < 2 * win:
        raise SignalTooShort(
            f"need at least {2 * win} samples for f_min={f_min:g} Hz"
        )
    hop = max(1, int(round(hop_s * sr)))
    n_frames = frame_grid(len(buf.samples), hop)

    frames = np.empty((n_frames, win))
    for i in range(n_frames):
        frames[i] = extract_centered(buf.samples, i * hop, win)
    frames -= frames.mean(axis=1, keepdims=True)

    # raw autocorrelation for all frames at once
    nfft = 1 << int(np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    raw = np.fft.irfft(np.abs(spec) ** 2, nfft, axis=1)[:, :lag_max + 2]

    # energy terms for proper normalization at each lag
    sq = frames ** 2
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1)
    total = csum[:, -1]
    lags = np.arange(lag_max + 2)
    # e_head[l] = sum of x[0..win-l-1]^2 ; e_tail[l] = sum of x[l..win-1]^2
    e_head = csum[:, win - lags]
    e_tail = total[:, None] - csum[:, lags]

    norm = np.sqrt(np.maximum(e_head * e_tail, 1e-30))
    nacf = raw / norm
    rms = np.sqrt(total / win)

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for i in range(n_frames):
        if rms[i] < SILENCE_RMS:
            continue
        seg = nacf[i]
        j = lag_min + int(np.argmax(seg[lag_min:lag_max + 1]))
        peak = seg[j]
        if peak < voicing_threshold:
            continue
        # octave correction: prefer the smallest sub-multiple lag whose peak
        # is nearly as strong as the winner
        best = j
        for m in range(int(j // lag_min), 1, -1):
            cand = int(round(j / m))
            if cand < lag_min:
                continue
            lo = max(lag_min, cand - 2)
            hi = min(lag_max, cand + 2)
            c = lo + int(np.argmax(seg[lo:hi + 1]))
            if seg[c] >= 0.9 * peak:
                best = c
                break
        lag = _parabolic(seg, best)
        est = sr / lag
        voiced[i] = True
        f0[i] = float(np.clip(est, f_min, f_max))

    mean_t0 = float(np.mean(1.0 / f0[voiced])) if voiced.any() else 0.0
    return AnalysisTrack(frame_hop=hop / sr, f0=f0, voiced=voiced, mean_t0=mean_t0)


def mark_voiced_samples(track: AnalysisTrack, n_samples: int, sample_rate: int) -> np.ndarray:
    """Boolean per-sample voicing mask (each frame owns +-hop/2 around its center)."""
    hop = int(round(track.frame_hop * sample_rate))
    owner = np.clip(np.round(np.arange(n_samples) / hop).astype(int), 0,
                    track.n_frames - 1)
    return track.voiced[owner]


def write_track_csv(track: AnalysisTrack, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "f0_hz", "voiced"])
        for t, f, v in zip(track.times(), track.f0, track.voiced):
            w.writerow([f"{t:.6f}", f"{f:.6f}", int(v)])


def write_gci_csv(track: AnalysisTrack, sample_rate: int, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_index", "time_s"])
        for g in track.gci:
            w.writerow([int(g), f"{g / sample_rate:.6f}"])
