"""Deterministic-plus-stochastic excitation and voice-quality transformation.

Voiced excitation is a train of pitch-resampled eigenresidual pulses below
the preset's maximum voiced frequency plus high-passed noise above it;
unvoiced regions get full-band noise. Transformation rebuilds a signal's
excitation with a target preset (new template, new band split, tilt filter
between the two presets) and refilters it through the signal's own envelopes.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.signal import fftconvolve

from .audio import AudioBuffer
from .eigen import compute_eigen_basis
from .errors import (
    DimensionMismatch,
    EmptyParams,
    InsufficientData,
    NoVoicedRegion,
    VqError,
)
from .framing import NormalizedFrameSet, extract_gci_frames, resample_sinc
from .gci import detect_gci
from .harmonicity import analyze_max_voiced
from .lpc import LpcEnvelope, forward_filter, inverse_filter, lpc_analyze
from .pitch import estimate_pitch
from .preset import VoiceQualityPreset, tilt_between
from .tilt import TiltFilter, apply_tilt, averaged_spectrum, fit_ar_to_spectrum

MIN_PRESET_UTTERANCES = 10
BAND_TRANSITION_HZ = 200.0
NOISE_ENVELOPE_VALLEY = 0.25
MIN_NOISE_TO_PULSE_RATIO = 0.05
MAX_NOISE_TO_PULSE_RATIO = 10.0
CLIP_FACTOR = 4.0
RMS_FLOOR = 1e-12
ENERGY_DEADZONE_DB = 0.9


@dataclass
class SynthesisParams:
    """Everything the excitation generator needs, on one frame grid."""

    f0: np.ndarray              # Hz per frame, 0 marks unvoiced
    envelope: LpcEnvelope
    energy: np.ndarray          # target excitation RMS per frame
    noise_seed: int
    sample_rate: int
    n_samples: int
    frame_hop: float            # seconds
    gci: np.ndarray = None      # optional analyzed pulse positions (samples)

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.energy = np.asarray(self.energy, dtype=np.float64)
        if len(self.f0) == 0 or self.n_samples <= 0:
            raise EmptyParams("nothing to synthesize")
        if not (len(self.f0) == self.envelope.n_frames == len(self.energy)):
            raise DimensionMismatch("f0, envelope and energy grids differ")
        if np.any(self.f0 < 0) or np.any(self.energy < 0):
            raise ValueError("f0 and energy must be non-negative")
        if self.gci is not None:
            self.gci = np.asarray(self.gci, dtype=np.float64)

    @property
    def n_frames(self) -> int:
        return len(self.f0)


@dataclass
class TransformResult:
    """Transformed audio plus the bookkeeping the caller reports."""

    audio: AudioBuffer
    source_label: str
    target_label: str
    noise_seed: int
    n_clipped: int = 0
    flags: tuple = ()


def band_split_pair(fm_hz: float, sample_rate: int,
                    transition_hz: float = BAND_TRANSITION_HZ):
    """Linear-phase low/high-pass pair crossing at fm_hz.

    The high-pass is the spectral complement of the low-pass (delta minus
    low-pass), so the two responses sum to an exact unit delay and the summed
    excitation spectrum stays flat across the boundary.
    """
    n_taps = (int(np.ceil(3.1 * sample_rate / transition_hz)) | 1)
    mid = n_taps // 2
    m = np.arange(n_taps) - mid
    fc = min(fm_hz / sample_rate, 0.4999)
    h_lp = 2 * fc * np.sinc(2 * fc * m) * np.hanning(n_taps)
    h_lp /= h_lp.sum()
    h_hp = -h_lp.copy()
    h_hp[mid] += 1.0
    return h_lp, h_hp


def _owner_frames(n_samples: int, hop: int, n_frames: int) -> np.ndarray:
    idx = np.round(np.arange(n_samples) / hop).astype(int)
    return np.clip(idx, 0, n_frames - 1)


def _frame_rms(x: np.ndarray, owner: np.ndarray, n_frames: int) -> np.ndarray:
    sums = np.bincount(owner, weights=x ** 2, minlength=n_frames)
    counts = np.maximum(np.bincount(owner, minlength=n_frames), 1)
    return np.sqrt(sums / counts)


def _place_gci(params: SynthesisParams, owner: np.ndarray) -> np.ndarray:
    """Pulse positions by phase accumulation: next = previous + local period.

    When the params carry analyzed closure instants, those take priority so a
    transform keeps its pulses phase-locked to the input; free-running
    accumulation covers synthesis from bare parameter tracks.
    """
    if params.gci is not None and len(params.gci):
        g = params.gci
        return g[(g >= 0) & (g < params.n_samples)]
    voiced_samples = np.flatnonzero(params.f0[owner] > 0)
    if len(voiced_samples) == 0:
        return np.array([], dtype=np.float64)
    positions = []
    cursor = float(voiced_samples[0])
    while cursor < params.n_samples:
        f0 = params.f0[owner[int(cursor)]]
        if f0 > 0:
            positions.append(cursor)
            cursor += params.sample_rate / f0
        else:
            nxt = np.searchsorted(voiced_samples, int(cursor) + 1)
            if nxt >= len(voiced_samples):
                break
            cursor = float(voiced_samples[nxt])
    return np.array(positions)


def _effective_fm(preset: VoiceQualityPreset, f0: np.ndarray) -> float:
    """Crossover frequency actually usable at synthesis time.

    A normalized frame of length L spanning two periods at pitch f0 can only
    represent content up to L * f0 / 4 Hz, so the deterministic band must not
    be asked to extend past that; anything higher is handed to the noise band.
    """
    voiced = f0[f0 > 0]
    if len(voiced) == 0:
        return preset.fm_hz
    template_top = preset.frame_length * float(np.mean(voiced)) / 4.0
    return min(preset.fm_hz, template_top)


def _noise_ratio(preset: VoiceQualityPreset, fm_hz: float,
                 sample_rate: float) -> float:
    """Noise-to-pulse RMS ratio that keeps the excitation PSD continuous.

    Bin k of the normalized grid sits at k * reference_mean_f0 / 2 Hz. The
    grid tops out at frame_length * reference_mean_f0 / 4 Hz, which can be
    well below the output Nyquist, so the stochastic band's power is
    extrapolated: its density is read from the grid bins above the split and
    assumed to hold across the whole band fm_hz .. sample_rate / 2.
    """
    bins = preset.spectrum_bins
    half_f0 = preset.reference_mean_f0 / 2.0
    k_split = int(round(fm_hz / half_f0))
    k_split = int(np.clip(k_split, 1, len(bins) - 1))
    power = bins ** 2
    low = float(np.sum(power[:k_split]))
    if low <= 0:
        return MIN_NOISE_TO_PULSE_RATIO
    # the pitch-normalizing resampler rolls off near the grid's own Nyquist,
    # so the top fifth of the grid under-reads; estimate the tail density
    # from the bins just above the split instead
    tail_stop = max(k_split + 1, int(round(0.8 * len(bins))))
    tail_density = float(np.mean(power[k_split:tail_stop]))
    band_bins = max(sample_rate / 2.0 - fm_hz, 0.0) / half_f0
    ratio = float(np.sqrt(tail_density * band_bins / low))
    return float(np.clip(ratio, MIN_NOISE_TO_PULSE_RATIO,
                         MAX_NOISE_TO_PULSE_RATIO))


def _compose_excitation(det: np.ndarray, noise_base: np.ndarray,
                        energy: np.ndarray, owner: np.ndarray,
                        voiced: np.ndarray, ratio: float) -> np.ndarray:
    """Mix pulses and noise so every frame zone lands on its energy target.

    The pulse train is scaled once so that over the voiced zones it carries
    a 1/(1 + ratio^2) share of the total energy budget; each zone's noise
    gain then solves the quadratic g^2 Pn + 2 g C + Pd = Pt exactly. Zones
    where the pulses alone already exceed the target (silences, onsets) get
    no noise and a plain pulse rescale instead. The noise gain is constant
    within a zone, which leaves white noise white; the pulses are never
    stepped mid-ring.
    """
    n_frames = len(energy)
    counts = np.maximum(np.bincount(owner, minlength=n_frames), 1)
    target_power = energy ** 2 * counts

    det_power = np.bincount(owner, weights=det ** 2, minlength=n_frames)
    have = float(np.sum(det_power[voiced]))
    budget = float(np.sum(target_power[voiced])) / (1.0 + ratio ** 2)
    scale = np.sqrt(budget / have) if have > 0 else 0.0
    det_scaled = det * scale
    det_power *= scale ** 2

    noise_power = np.bincount(owner, weights=noise_base ** 2,
                              minlength=n_frames)
    cross = np.bincount(owner, weights=det_scaled * noise_base,
                        minlength=n_frames)
    g = np.zeros(n_frames)
    s = np.ones(n_frames)
    fits = (target_power >= det_power) & (noise_power > RMS_FLOOR ** 2)
    disc = np.where(fits, cross ** 2
                    + noise_power * (target_power - det_power), 0.0)
    g[fits] = ((-cross[fits] + np.sqrt(disc[fits])) / noise_power[fits])
    over = ~fits
    s[over] = np.sqrt(target_power[over]
                      / np.maximum(det_power[over], RMS_FLOOR ** 2))
    return det_scaled * s[owner] + noise_base * g[owner]


def _pitch_noise_envelope(n_samples: int, gci: np.ndarray,
                          valley: float = NOISE_ENVELOPE_VALLEY) -> np.ndarray:
    """Triangular modulation peaking at the closure instants.

    Each modulated span is normalized to unit RMS so the envelope shapes the
    noise within the period without changing the band's energy.
    """
    env = np.ones(n_samples)
    marks = np.round(gci).astype(int)
    # mean square of a linear 1 -> valley ramp
    ramp_ms = (1.0 + valley + valley ** 2) / 3.0
    for g0, g1 in zip(marks[:-1], marks[1:]):
        gap = g1 - g0
        if gap < 2:
            continue
        mid = g0 + gap // 2
        env[g0:mid] = np.linspace(1.0, valley, mid - g0, endpoint=False)
        env[mid:g1] = np.linspace(valley, 1.0, g1 - mid, endpoint=False)
        env[g0:g1] /= np.sqrt(ramp_ms)
    return env


def synthesize_excitation(params: SynthesisParams,
                          preset: VoiceQualityPreset,
                          tilt_filter: TiltFilter | None = None,
                          noise_gain: float = 1.0,
                          pitch_synchronous_noise: bool = True,
                          noise_to_pulse_ratio: float | None = None) -> AudioBuffer:
    """Render the two-band excitation for one utterance.

    The eigenresidual is tilt-filtered once in the normalized domain, then
    per pulse resampled to two local periods, Hanning-weighted and
    overlap-added at one-period spacing. Noise is drawn per frame from a
    counter-based generator keyed by (seed, frame index) so rendering order
    never changes the result. Pulses and noise are mixed so that every
    frame zone lands exactly on its params.energy target; the band balance
    follows noise_to_pulse_ratio (estimated from the preset spectrum when
    not given).
    """
    sr = params.sample_rate
    n = params.n_samples
    hop = max(1, int(round(params.frame_hop * sr)))
    owner = _owner_frames(n, hop, params.n_frames)

    template = preset.eigenresidual
    if tilt_filter is not None:
        template = apply_tilt(template, tilt_filter)

    gci = _place_gci(params, owner)
    det = np.zeros(n)
    segment_cache: dict[int, np.ndarray] = {}
    for c in gci:
        center = int(round(c))
        period = sr / params.f0[owner[min(center, n - 1)]]
        n_loc = 2 * int(round(period))
        if n_loc < 4:
            continue
        seg = segment_cache.get(n_loc)
        if seg is None:
            seg = resample_sinc(template, n_loc) * np.hanning(n_loc)
            segment_cache[n_loc] = seg
        lo = center - n_loc // 2
        a = max(lo, 0)
        b = min(lo + n_loc, n)
        if b > a:
            det[a:b] += seg[a - lo:b - lo]

    fm_eff = _effective_fm(preset, params.f0)
    h_lp, h_hp = band_split_pair(fm_eff, sr)
    det_lp = fftconvolve(det, h_lp, mode="same")

    noise = np.empty(n)
    bounds = np.flatnonzero(np.diff(owner)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [n]])
    seed = params.noise_seed & (2 ** 64 - 1)
    for lo_z, hi_z in zip(starts, ends):
        gen = Generator(Philox(key=[seed, int(owner[lo_z])]))
        noise[lo_z:hi_z] = gen.standard_normal(hi_z - lo_z)

    hp_noise = fftconvolve(noise, h_hp, mode="same")
    hp_noise /= max(np.sqrt(np.sum(h_hp ** 2)), RMS_FLOOR)
    if pitch_synchronous_noise and len(gci):
        hp_noise *= _pitch_noise_envelope(n, gci)

    voiced = params.f0 > 0
    if noise_to_pulse_ratio is None:
        noise_to_pulse_ratio = _noise_ratio(preset, fm_eff, sr)
    ratio = noise_gain * noise_to_pulse_ratio

    # rough per-frame noise level; the composition refines it per zone
    det_rms = _frame_rms(det_lp, owner, params.n_frames)
    if params.n_frames >= 3:
        det_level = np.convolve(det_rms, np.ones(3) / 3.0, mode="same")
    else:
        det_level = det_rms
    v_gain = np.where(voiced, ratio * det_level, 0.0)
    uv_gain = np.where(voiced, 0.0, noise_gain * params.energy)

    centers = np.arange(params.n_frames) * hop
    t = np.arange(n)
    noise_base = hp_noise * np.interp(t, centers, v_gain) \
        + noise * np.interp(t, centers, uv_gain)

    exc = _compose_excitation(det_lp, noise_base, params.energy,
                              owner, voiced, ratio)
    return AudioBuffer(samples=exc, sample_rate=sr)


def build_preset(corpus, label: str, *,
                 normalized_length: int = 200,
                 tilt_order: int = 20,
                 f_min: float = 60.0,
                 f_max: float = 400.0,
                 min_utterances: int = MIN_PRESET_UTTERANCES) -> VoiceQualityPreset:
    """Aggregate one voice quality's preset from its labeled utterances.

    corpus is an iterable of (label, AudioBuffer) pairs; only entries whose
    label matches are used. Each utterance contributes pitch-normalized
    residual frames, per-frame maximum voiced frequency and voiced f0 values.
    """
    rows = []
    fm_values = []
    f0_values = []
    sample_rate = 0
    voiced_utterances = 0
    for item_label, buf in corpus:
        if item_label != label:
            continue
        track = estimate_pitch(buf, f_min=f_min, f_max=f_max)
        if not track.voiced.any():
            continue
        env = lpc_analyze(buf, track)
        residual = inverse_filter(buf, env)
        track = detect_gci(buf, track, residual=residual.samples)
        frames = extract_gci_frames(residual, track, normalized_length)
        rows.append(frames.frames)
        fm_values.append(analyze_max_voiced(buf, track).fm)
        f0_values.append(track.f0[track.voiced])
        sample_rate = buf.sample_rate
        voiced_utterances += 1

    if voiced_utterances < min_utterances:
        raise InsufficientData(
            f"label {label!r} has {voiced_utterances} voiced utterances, "
            f"needs {min_utterances}")

    all_f0 = np.concatenate(f0_values)
    all_fm = np.concatenate(fm_values)
    if len(all_fm) == 0:
        raise InsufficientData("no frame was long enough to measure the "
                               "maximum voiced frequency")
    pooled = NormalizedFrameSet(frames=np.vstack(rows),
                                frame_length=normalized_length,
                                sample_rate=sample_rate,
                                mean_f0=float(np.mean(all_f0)))
    basis = compute_eigen_basis(pooled, k=1)
    spectrum = averaged_spectrum(pooled)
    return VoiceQualityPreset(
        label=label,
        fm_hz=float(np.mean(all_fm)),
        reference_mean_f0=float(np.mean(all_f0)),
        eigenresidual=basis.eigenvectors[0],
        frame_length=normalized_length,
        tilt_model=fit_ar_to_spectrum(spectrum, tilt_order),
        spectrum_bins=spectrum.bins,
        mean_frame=basis.mean_frame,
        eigenvalue_share=float(basis.eigenvalues[0]),
    )


def _stationary_filter_gain(env: LpcEnvelope, n_fft: int = 1024) -> np.ndarray:
    """Per-frame RMS gain of the synthesis filter 1/A(z) for flat input.

    This is the L2 norm of each frame's all-pole impulse response, evaluated
    on a DFT grid. A spectrally flat excitation of RMS r comes out of the
    filter with RMS close to r times this gain, which makes it the bridge
    between audio-domain energy targets and excitation-domain ones.
    """
    resp = np.abs(np.fft.fft(env.coefficients, n_fft, axis=1))
    return np.sqrt(np.mean(1.0 / np.maximum(resp, 1e-9) ** 2, axis=1))


def _transform_noise_ratio(residual: np.ndarray, owner: np.ndarray,
                           track, source_preset: VoiceQualityPreset,
                           target_preset: VoiceQualityPreset,
                           sample_rate: int) -> float:
    """Noise-to-pulse ratio for a transform, anchored to the input.

    The ratio is measured directly from the input residual's energy split
    around the synthesis crossover, full-bandwidth and free of the
    normalized grid's resampling bias. For cross-quality transforms it is
    shifted by the quotient of the two presets' own estimates, whose common
    bias cancels; for an identity transform the quotient is one and the
    measured split is used as is.
    """
    fm_eff = _effective_fm(target_preset, track.f0)
    h_lp, h_hp = band_split_pair(fm_eff, sample_rate)
    mask = track.voiced[owner]
    if not mask.any():
        return _noise_ratio(target_preset, fm_eff, sample_rate)
    low = fftconvolve(residual, h_lp, mode="same")[mask]
    high = fftconvolve(residual, h_hp, mode="same")[mask]
    low_rms = float(np.sqrt(np.mean(low ** 2)))
    high_rms = float(np.sqrt(np.mean(high ** 2)))
    if low_rms <= RMS_FLOOR:
        return _noise_ratio(target_preset, fm_eff, sample_rate)
    measured = high_rms / low_rms
    quotient = (_noise_ratio(target_preset, fm_eff, sample_rate)
                / _noise_ratio(source_preset,
                               _effective_fm(source_preset, track.f0),
                               sample_rate))
    return float(np.clip(measured * quotient, MIN_NOISE_TO_PULSE_RATIO,
                         MAX_NOISE_TO_PULSE_RATIO))


def _limit_energy_drift(y: np.ndarray, reference: np.ndarray,
                        owner: np.ndarray, voiced: np.ndarray,
                        n_frames: int, hop: int,
                        deadzone_db: float = ENERGY_DEADZONE_DB,
                        passes: int = 8) -> np.ndarray:
    """Pull per-zone RMS back inside a deadzone around the input's.

    The synthesis filter amplifies noise differently from the original
    residual wherever its fit is poor (utterance edges, voicing onsets), so
    zone energies can drift there. Zones within the deadzone are left
    untouched; offenders are scaled just enough to reach the boundary.

    Voiced zones are corrected with gains ramped linearly between zone
    centers: a hard gain step inside a voiced stretch reads as a spectral
    event to any envelope fit. Ramps under-apply and cannot express
    corrections that alternate in sign, hence the extra passes. Unvoiced
    zones hold noise, where a per-zone constant is safe, so they are set
    exactly in one step. Zones whose reference sits 60 dB under the loudest
    have no level worth preserving and are left alone rather than paid for
    in ramp distortion next door.
    """
    centers = np.arange(n_frames) * hop
    t = np.arange(len(y))
    r_ref = _frame_rms(reference, owner, n_frames)
    negligible = r_ref < float(r_ref.max()) * 1e-3
    hi = r_ref * 10.0 ** (deadzone_db / 20.0)
    lo = r_ref * 10.0 ** (-deadzone_db / 20.0)
    out = y

    def correction(signal):
        r_out = _frame_rms(signal, owner, n_frames)
        desired = np.clip(r_out, lo, hi)
        factor = np.where(r_out > RMS_FLOOR,
                          desired / np.maximum(r_out, RMS_FLOOR), 1.0)
        factor[negligible] = 1.0
        return factor

    for _ in range(passes):
        factor = np.where(voiced, correction(out), 1.0)
        if np.any(factor != 1.0):
            out = out * np.interp(t, centers, factor)
        factor = np.where(voiced, 1.0, correction(out))
        done = np.all(factor == 1.0)
        if not done:
            out = out * factor[owner]
        elif np.all(np.where(voiced, correction(out), 1.0) == 1.0):
            break
    return out


def transform_voice_quality(buf: AudioBuffer,
                            source_preset: VoiceQualityPreset,
                            target_preset: VoiceQualityPreset,
                            noise_seed: int = 0,
                            noise_gain: float = 1.0,
                            pitch_synchronous_noise: bool = True,
                            f_min: float = 60.0,
                            f_max: float = 400.0) -> TransformResult:
    """Re-render a signal's excitation in the target voice quality.

    The input supplies pitch, voicing, spectral envelopes and the energy
    contour; the target preset supplies the excitation character. The tilt
    filter between the two presets reshapes the template spectrum before
    resampling.
    """
    sr = buf.sample_rate
    track = estimate_pitch(buf, f_min=f_min, f_max=f_max)
    if not track.voiced.any():
        raise NoVoicedRegion("input carries no voiced frames to transform")
    env = lpc_analyze(buf, track)
    residual = inverse_filter(buf, env)

    track = detect_gci(buf, track, residual=residual.samples)
    hop = max(1, int(round(track.frame_hop * sr)))
    owner = _owner_frames(len(buf.samples), hop, track.n_frames)
    # audio-domain energy contour mapped through the filter's flat-input
    # gain: more robust than the residual's own RMS wherever the envelope
    # fit is poor (edges, onsets) and identical where it is good
    audio_rms = _frame_rms(buf.samples, owner, track.n_frames)
    params = SynthesisParams(
        f0=track.f0,
        envelope=env,
        energy=audio_rms / np.maximum(_stationary_filter_gain(env), RMS_FLOOR),
        noise_seed=noise_seed,
        sample_rate=sr,
        n_samples=len(buf.samples),
        frame_hop=track.frame_hop,
        gci=track.gci,
    )
    ratio = _transform_noise_ratio(residual.samples, owner, track,
                                   source_preset, target_preset, sr)
    excitation = synthesize_excitation(
        params, target_preset,
        tilt_filter=tilt_between(source_preset, target_preset),
        noise_gain=noise_gain,
        pitch_synchronous_noise=pitch_synchronous_noise,
        noise_to_pulse_ratio=ratio)

    y = forward_filter(excitation.samples, env, sr)
    y = _limit_energy_drift(y, buf.samples, owner, track.voiced,
                            track.n_frames, hop)

    if not np.all(np.isfinite(y)):
        raise VqError("transformation produced non-finite samples")
    limit = CLIP_FACTOR * float(np.max(np.abs(buf.samples)))
    clipped = int(np.sum(np.abs(y) > limit))
    flags = ()
    if clipped:
        y = np.clip(y, -limit, limit)
        flags = ("clipped",)
    return TransformResult(audio=AudioBuffer(samples=y, sample_rate=sr),
                           source_label=source_preset.label,
                           target_label=target_preset.label,
                           noise_seed=noise_seed,
                           n_clipped=clipped,
                           flags=flags)
