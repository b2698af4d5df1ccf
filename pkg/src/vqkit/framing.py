"""Pitch-synchronous frame extraction on a fixed normalized grid.

Each usable GCI yields one frame: two local pitch periods, Hanning windowed,
band-limited-resampled to a fixed number of points and scaled to unit energy.
"""

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer
from .errors import EmptyFrameSet, FrameTooShort, NoGci, ZeroFrame
from .pitch import AnalysisTrack

SINC_HALF_WIDTH = 16
DEGENERATE_ENERGY = 1e-10


@dataclass
class NormalizedFrameSet:
    """Unit-energy frames on a common length grid (two mean pitch periods)."""

    frames: np.ndarray            # (n_frames, frame_length)
    frame_length: int
    sample_rate: int
    mean_f0: float                # Hz, grid scale: length covers 2 mean periods
    source_kind: str = "residual"          # "speech" | "residual"
    gci: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    periods: np.ndarray = field(default_factory=lambda: np.array([]))  # samples
    energies: np.ndarray = field(default_factory=lambda: np.array([]))
    skipped_edge: int = 0
    skipped_degenerate: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-d matrix")
        if self.frames.shape[0] and self.frames.shape[1] != self.frame_length:
            raise ValueError("frame rows must match frame_length")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def resample_sinc(x: np.ndarray, n_out: int,
                  half_width: int = SINC_HALF_WIDTH) -> np.ndarray:
    """Resample a finite segment to n_out points with a windowed-sinc kernel.

    Endpoints map to endpoints. When shrinking, the kernel cutoff drops to the
    output rate so the result stays alias-free.
    """
    x = np.asarray(x, dtype=np.float64)
    n_in = len(x)
    if n_in < 2 or n_out < 2:
        raise FrameTooShort("resampling needs at least two points on each side")
    if n_in == n_out:
        return x.copy()
    pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    cutoff = min(1.0, (n_out - 1) / (n_in - 1))
    support = half_width / cutoff
    d = pos[:, None] - np.arange(n_in)[None, :]
    u = d / support
    taper = np.where(np.abs(u) < 1.0, 0.5 + 0.5 * np.cos(np.pi * u), 0.0)
    kern = cutoff * np.sinc(cutoff * d) * taper
    # correct the truncated kernel's first two moments so constants and
    # straight lines pass through exactly (kills edge droop and tilt ripple)
    m0 = kern.sum(axis=1)
    m1 = (kern * d).sum(axis=1)
    m2 = (kern * d * d).sum(axis=1)
    det = m0 * m2 - m1 * m1
    safe = np.abs(det) > 1e-12
    alpha = np.where(safe, m2 / np.where(safe, det, 1.0), 1.0 / np.maximum(m0, 1e-12))
    beta = np.where(safe, -m1 / np.where(safe, det, 1.0), 0.0)
    kern *= (alpha[:, None] + beta[:, None] * d)
    return kern @ x


def normalize_frame(frame: np.ndarray) -> np.ndarray:
    """Scale to unit energy; a zero frame is an error."""
    e = float(np.sqrt(np.sum(frame ** 2)))
    if e < DEGENERATE_ENERGY:
        raise ZeroFrame("cannot normalize an all-zero frame")
    return frame / e


def extract_gci_frames(buf: AudioBuffer, track: AnalysisTrack,
                       normalized_length: int = 200,
                       source_kind: str = "residual") -> NormalizedFrameSet:
    """One normalized frame per usable GCI.

    Raises NoGci when the track carries no closure instants; GCIs whose
    two-period span leaves the signal are skipped and counted, as are frames
    with no usable energy.
    """
    if normalized_length < 32 or normalized_length % 2:
        raise ValueError("normalized_length must be even and >= 32")
    if len(track.gci) == 0:
        raise NoGci("track carries no glottal closure instants")
    sr = buf.sample_rate
    x = buf.samples
    hop = int(round(track.frame_hop * sr))

    rows = []
    kept_gci = []
    kept_period = []
    kept_energy = []
    skipped_edge = 0
    skipped_degenerate = 0
    for g in track.gci:
        fi = int(np.clip(round(g / hop), 0, track.n_frames - 1))
        if not track.voiced[fi]:
            skipped_edge += 1
            continue
        period = sr / track.f0[fi]
        length = 2 * int(round(period))
        lo = g - length // 2
        if lo < 0 or lo + length > len(x) or length < 4:
            skipped_edge += 1
            continue
        seg = x[lo:lo + length] * np.hanning(length)
        e = float(np.sqrt(np.sum(seg ** 2)))
        if e < DEGENERATE_ENERGY:
            skipped_degenerate += 1
            continue
        frame = resample_sinc(seg, normalized_length)
        frame = normalize_frame(frame)
        rows.append(frame)
        kept_gci.append(int(g))
        kept_period.append(period)
        kept_energy.append(e)

    if not rows:
        raise EmptyFrameSet("no usable frames around the detected GCIs")
    voiced_f0 = track.f0[track.voiced]
    return NormalizedFrameSet(
        frames=np.vstack(rows),
        frame_length=normalized_length,
        sample_rate=sr,
        source_kind=source_kind,
        mean_f0=float(np.mean(voiced_f0)) if len(voiced_f0) else 0.0,
        gci=np.array(kept_gci, dtype=int),
        periods=np.array(kept_period),
        energies=np.array(kept_energy),
        skipped_edge=skipped_edge,
        skipped_degenerate=skipped_degenerate,
    )
