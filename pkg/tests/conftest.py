"""Shared synthetic-signal builders for the test suite.

Everything here is constructed from first principles (impulse trains, pulse
models with known timing parameters, explicit pole placements) so tests can
compare against ground truth rather than against the code under test.
"""

import numpy as np
import pytest
from scipy.signal import lfilter

SR = 16000


def impulse_train(period: int, n: int, amp: float = 1.0,
                  offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Unit impulses every ``period`` samples; returns (signal, positions)."""
    x = np.zeros(n)
    pos = np.arange(offset, n, period)
    x[pos] = amp
    return x, pos


def vocal_tract(sr: int = SR,
                formants=(500.0, 1500.0, 2500.0, 3500.0),
                bandwidths=(80.0, 100.0, 120.0, 150.0)) -> np.ndarray:
    """Stable all-pole filter from explicit resonance placements.

    Returns the monic denominator a; filter is 1/A(z).
    """
    poles = []
    for f, bw in zip(formants, bandwidths):
        r = np.exp(-np.pi * bw / sr)
        th = 2 * np.pi * f / sr
        poles.append(r * np.exp(1j * th))
        poles.append(r * np.exp(-1j * th))
    a = np.real(np.poly(poles))
    return a / a[0]


def rosenberg_flow(period: int, oq: float, n_cycles: int = 1,
                   oversample: int = 1) -> np.ndarray:
    """Glottal flow pulse train: raised-cosine opening, cosine-quarter closing.

    The cycle starts at the opening instant; opening lasts 2/3 of the open
    phase, closing 1/3; the rest of the period is closed (zero flow).
    """
    p = period * oversample
    t = np.arange(p) / p
    te = oq
    tp = 2.0 * oq / 3.0
    flow = np.zeros(p)
    opening = t < tp
    closing = (t >= tp) & (t < te)
    flow[opening] = 0.5 * (1.0 - np.cos(np.pi * t[opening] / tp))
    flow[closing] = np.cos(0.5 * np.pi * (t[closing] - tp) / (te - tp))
    return np.tile(flow, n_cycles)


def rosenberg_deriv(period: int, oq: float, n_cycles: int = 1,
                    oversample: int = 1) -> np.ndarray:
    """Analytic derivative of rosenberg_flow, same sampling and layout."""
    p = period * oversample
    t = np.arange(p) / p
    te = oq
    tp = 2.0 * oq / 3.0
    tn = te - tp
    d = np.zeros(p)
    opening = t < tp
    closing = (t >= tp) & (t < te)
    d[opening] = 0.5 * (np.pi / tp) * np.sin(np.pi * t[opening] / tp)
    d[closing] = -(0.5 * np.pi / tn) * np.sin(0.5 * np.pi * (t[closing] - tp) / tn)
    return np.tile(d, n_cycles)  # per unit of normalized cycle time


def rosenberg_train(f0: float, sr: int, duration: float,
                    oq: float) -> tuple[np.ndarray, np.ndarray]:
    """Flow-derivative pulse train; returns (signal, closure sample indices).

    The closure instant of each cycle (most negative derivative sample) is
    reported as its GCI.
    """
    period = int(round(sr / f0))
    n_cycles = int(duration * sr / period)
    cycle = rosenberg_deriv(period, oq)
    x = np.tile(cycle, n_cycles)
    closure_off = int(np.argmin(cycle))
    gci = closure_off + period * np.arange(n_cycles)
    return x, gci


def voiced_utterance(f0: float, sr: int, duration: float, oq: float = 0.5,
                     tract: np.ndarray | None = None,
                     amp: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Rosenberg source through an all-pole tract; returns (signal, gci)."""
    src, gci = rosenberg_train(f0, sr, duration, oq)
    a = vocal_tract(sr) if tract is None else tract
    y = lfilter([1.0], a, src)
    peak = np.max(np.abs(y))
    return amp * y / peak, gci


@pytest.fixture
def tmp_wav(tmp_path):
    """Factory writing arbitrary arrays as WAV files for ingestion tests."""
    from scipy.io import wavfile

    def write(name: str, data, sr: int = SR):
        p = tmp_path / name
        wavfile.write(str(p), sr, data)
        return p

    return write


def spike_residual(length: int = 60) -> np.ndarray:
    """Sharp prototype pulse: negative spike plus an alternating decay tail."""
    t = np.zeros(length)
    t[0] = -1.0
    tail = np.arange(1, 40)
    t[1:40] = 0.18 * (-1) ** tail * np.exp(-tail / 6.0)
    return t


def band_split_voice(f0: float, fm_true: float, seed: int,
                     duration: float = 0.5, amp: float = 0.1,
                     valley: float = 0.25, silence: float = 0.0,
                     sr: int = SR):
    """Synthetic voiced utterance with a controlled harmonic/noise boundary.

    Harmonic pulse train below fm_true, pitch-modulated white noise above,
    with the noise level chosen so the source's spectral density is
    continuous across the boundary. Optional leading/trailing silence frames
    the utterance the way recorded sentences are framed. Returns an
    AudioBuffer.
    """
    from scipy.signal import firwin
    from vqkit.audio import AudioBuffer

    rng = np.random.default_rng(seed)
    p = int(round(sr / f0))
    n = int(duration * sr)
    proto = spike_residual()
    exc = np.zeros(n)
    marks = np.arange(p, n - p, p)
    for g in marks:
        exc[g:g + len(proto)] += proto
    taps = firwin(481, fm_true / (sr / 2))
    det = np.roll(lfilter(taps, [1.0], exc), -240)
    noise = rng.standard_normal(n)
    hp = -taps.copy()
    hp[240] += 1.0
    noise_hp = np.roll(lfilter(hp, [1.0], noise), -240)
    env = np.ones(n)
    ramp_ms = (1.0 + valley + valley ** 2) / 3.0
    for g0, g1 in zip(marks[:-1], marks[1:]):
        mid = g0 + (g1 - g0) // 2
        env[g0:mid] = np.linspace(1.0, valley, mid - g0, endpoint=False)
        env[mid:g1] = np.linspace(valley, 1.0, g1 - mid, endpoint=False)
        env[g0:g1] /= np.sqrt(ramp_ms)
    noise_hp *= env
    det_rms = np.sqrt(np.mean(det ** 2))
    want = det_rms * np.sqrt((sr / 2 - fm_true) / fm_true)
    noise_hp *= want / np.sqrt(np.mean(noise_hp ** 2))
    src = det + noise_hp
    x = lfilter([1.0], vocal_tract(sr), src)
    x = 0.95 * amp * x / np.max(np.abs(x))
    if silence > 0:
        # recording-style surround: silence carries a -50 dB noise floor,
        # digital zeros make LPC fits degenerate at the utterance edges
        floor = 10.0 ** (-50.0 / 20.0) * amp
        n_pad = int(silence * sr)
        pads = floor * rng.standard_normal(2 * n_pad)
        x = np.concatenate([pads[:n_pad], x, pads[n_pad:]])
    return AudioBuffer(samples=x, sample_rate=sr)
