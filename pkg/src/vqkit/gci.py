"""Glottal closure instant detection.

Strategy: a mean-based signal (speech smoothed by a Blackman window sized
from the mean pitch period) marks one search interval per glottal cycle; the
strongest negative peak of the LPC residual inside each interval is the GCI.
"""

from dataclasses import replace

import numpy as np
from scipy.signal import fftconvolve

from .audio import AudioBuffer
from .errors import NoGci
from .lpc import inverse_filter, lpc_analyze
from .pitch import AnalysisTrack, mark_voiced_samples

MEAN_WINDOW_PERIODS = 1.75
MIN_SPACING_PERIODS = 0.4
MEDIAN_SPACING_PERIODS = 0.45


def _local_minima(x: np.ndarray) -> np.ndarray:
    inner = (x[1:-1] < x[:-2]) & (x[1:-1] <= x[2:])
    return np.nonzero(inner)[0] + 1


def detect_gci(buf: AudioBuffer, track: AnalysisTrack,
               residual: np.ndarray | None = None) -> AnalysisTrack:
    """Locate glottal closure instants; returns a copy of track with gci set.

    An entirely unvoiced track comes back with an empty GCI list and a
    "no_voiced_region" flag; NoGci is raised when voiced frames exist but no
    closure instant survives the voicing gate.
    """
    if not track.voiced.any():
        return replace(track, gci=np.array([], dtype=int),
                       flags=track.flags + ("no_voiced_region",))
    sr = buf.sample_rate
    x = buf.samples
    if residual is None:
        residual = inverse_filter(buf, lpc_analyze(buf)).samples
    res = np.asarray(residual, dtype=np.float64)
    if len(res) != len(x):
        raise ValueError("residual length must match signal length")

    vmask = mark_voiced_samples(track, len(x), sr)

    # enforce negative-going closure peaks; flip if residual skews positive
    r = res[vmask]
    if np.mean(r ** 3) > 0:
        res = -res

    wlen = int(round(MEAN_WINDOW_PERIODS * track.mean_t0 * sr))
    wlen = max(3, wlen) | 1
    w = np.blackman(wlen)
    w /= w.sum()
    ms = fftconvolve(x, w, mode="same")

    minima = _local_minima(ms)
    minima = minima[vmask[minima]]

    hop = int(round(track.frame_hop * sr))
    cands: list[tuple[int, float]] = []
    for m in minima:
        fi = int(np.clip(round(m / hop), 0, track.n_frames - 1))
        if not track.voiced[fi]:
            continue
        period = sr / track.f0[fi]
        lo = max(0, int(round(m - period / 4)))
        hi = min(len(x), int(round(m + 3 * period / 4)))
        if hi - lo < 3:
            continue
        g = lo + int(np.argmin(res[lo:hi]))
        if vmask[g]:
            cands.append((g, res[g]))

    if not cands:
        raise NoGci("no closure instants found in voiced regions")

    cands.sort()
    # spacing floor from the utterance's median period: local f0 estimates
    # go astray on edge frames whose window runs past the signal, and a
    # junk-high f0 would otherwise let doubled detections through
    median_period = sr / float(np.median(track.f0[track.voiced]))
    floor = MEDIAN_SPACING_PERIODS * median_period
    kept: list[tuple[int, float]] = []
    for g, amp in cands:
        fi = int(np.clip(round(g / hop), 0, track.n_frames - 1))
        period = sr / track.f0[fi] if track.voiced[fi] else sr * track.mean_t0
        if kept and g - kept[-1][0] < max(MIN_SPACING_PERIODS * period, floor):
            if amp < kept[-1][1]:
                kept[-1] = (g, amp)
            continue
        kept.append((g, amp))

    gci = np.array([g for g, _ in kept], dtype=int)
    return replace(track, gci=gci)
