"""Maximum voiced frequency: the boundary between harmonic and noise bands.

Each harmonic k*F0 is tested for sinusoid-likeness (a sharp peak well above
the local spectral floor, close to its nominal position). The reported
boundary is the highest harmonic that is itself voiced while at least 80% of
the harmonics up to it are voiced too.
"""

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import FrameTooShort
from .lpc import extract_centered
from .pitch import AnalysisTrack

PEAK_OVER_FLOOR_DB = 6.0
MAX_PEAK_OFFSET = 1.0 / 8.0      # of f0
SEARCH_HALF_WIDTH = 1.0 / 4.0    # of f0
VOICED_FRACTION = 0.8
TRAILING_WINDOW = 5              # harmonics; voicing fraction must hold here too
ZERO_PAD_FACTOR = 4
MEDIAN_SMOOTH = 3


@dataclass
class MaxVoicedTrack:
    """Per-voiced-frame maximum voiced frequency plus utterance summaries."""

    times: np.ndarray      # seconds, voiced frames only
    fm: np.ndarray         # Hz, same length as times
    mean_fm: float
    median_fm: float
    sample_rate: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.fm = np.asarray(self.fm, dtype=np.float64)
        if np.any(self.fm < 0) or np.any(self.fm > self.sample_rate / 2):
            raise ValueError("fm outside [0, Nyquist]")


def estimate_max_voiced_frequency(frame: np.ndarray, f0: float,
                                  sample_rate: int) -> float:
    """Boundary frequency for one windowed frame.

    The frame must span at least four pitch periods (FrameTooShort otherwise)
    and is zero-padded 4x before the spectral test.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    if len(frame) < 4 * sample_rate / f0 - 2:
        raise FrameTooShort(
            f"need >= 4 periods ({4 * sample_rate / f0:.0f} samples), got {len(frame)}"
        )
    nfft = 1
    while nfft < ZERO_PAD_FACTOR * len(frame):
        nfft *= 2
    mag = np.abs(np.fft.rfft(frame, nfft))
    bin_hz = sample_rate / nfft

    n_harm = int(np.floor((sample_rate / 2) / f0))
    ratio_floor = 10 ** (PEAK_OVER_FLOOR_DB / 20)
    voiced = np.zeros(n_harm + 1, dtype=bool)
    for k in range(1, n_harm + 1):
        target = k * f0
        lo = max(1, int(round((target - SEARCH_HALF_WIDTH * f0) / bin_hz)))
        hi = min(len(mag) - 1, int(round((target + SEARCH_HALF_WIDTH * f0) / bin_hz)))
        if hi <= lo:
            continue
        j = lo + int(np.argmax(mag[lo:hi + 1]))
        nlo = max(0, int(round((target - f0) / bin_hz)))
        nhi = min(len(mag) - 1, int(round((target + f0) / bin_hz)))
        idx = np.arange(nlo, nhi + 1)
        # floor = level between harmonics, so skip the peak search band
        between = idx[(idx < lo) | (idx > hi)]
        floor = np.median(mag[between]) if len(between) else np.median(mag[idx])
        close_enough = abs(j * bin_hz - target) < MAX_PEAK_OFFSET * f0
        voiced[k] = close_enough and mag[j] >= ratio_floor * max(floor, 1e-300)

    # the voicing fraction must hold both cumulatively and over the most
    # recent harmonics, so one stray noise peak cannot drag the boundary up
    fm = f0
    n_voiced = 0
    for k in range(1, n_harm + 1):
        n_voiced += int(voiced[k])
        recent = voiced[max(1, k - TRAILING_WINDOW + 1):k + 1]
        if (voiced[k] and n_voiced / k >= VOICED_FRACTION
                and np.mean(recent) >= VOICED_FRACTION):
            fm = k * f0
    return float(fm)


def _median3(x: np.ndarray) -> np.ndarray:
    if len(x) < MEDIAN_SMOOTH:
        return x.copy()
    out = x.copy()
    for i in range(1, len(x) - 1):
        out[i] = np.median(x[i - 1:i + 2])
    return out


def analyze_max_voiced(buf: AudioBuffer, track: AnalysisTrack) -> MaxVoicedTrack:
    """Per-voiced-frame fm over an utterance, median-smoothed."""
    sr = buf.sample_rate
    hop = int(round(track.frame_hop * sr))
    times = []
    raw = []
    for i in np.flatnonzero(track.voiced):
        f0 = track.f0[i]
        length = 4 * int(round(sr / f0))
        lo = i * hop - length // 2
        if lo < 0 or lo + length > len(buf.samples):
            continue  # window must hold four full periods of real signal
        frame = extract_centered(buf.samples, i * hop, length) * np.hanning(length)
        raw.append(estimate_max_voiced_frequency(frame, f0, sr))
        times.append(i * hop / sr)
    fm = _median3(np.array(raw))
    if len(fm):
        mean_fm = float(np.mean(fm))
        median_fm = float(np.median(fm))
    else:
        mean_fm = 0.0
        median_fm = 0.0
    return MaxVoicedTrack(times=np.array(times), fm=fm,
                          mean_fm=mean_fm, median_fm=median_fm, sample_rate=sr)
