import numpy as np
import pytest

from conftest import impulse_train, voiced_utterance
from vqkit.audio import AudioBuffer
from vqkit.errors import SignalTooShort
from vqkit.pitch import AnalysisTrack, estimate_pitch, write_gci_csv, write_track_csv

SR = 16000


def interior(track, margin=10):
    sel = np.zeros(track.n_frames, dtype=bool)
    sel[margin:-margin] = True
    return sel


def test_pure_sine_200hz():
    t = np.arange(SR) / SR
    buf = AudioBuffer(0.3 * np.sin(2 * np.pi * 200 * t), SR)
    track = estimate_pitch(buf)
    sel = interior(track) & track.voiced
    assert sel.sum() > 0.8 * track.n_frames
    assert np.all(np.abs(track.f0[sel] - 200.0) < 1.0)


def test_white_noise_mostly_unvoiced():
    rng = np.random.default_rng(11)
    buf = AudioBuffer(0.1 * rng.standard_normal(SR), SR)
    track = estimate_pitch(buf)
    assert track.voiced.mean() < 0.1


def test_silence_unvoiced():
    track = estimate_pitch(AudioBuffer(np.zeros(SR), SR))
    assert not track.voiced.any()
    assert track.mean_t0 == 0.0


def test_pulse_train_100hz():
    x, _ = impulse_train(160, SR, offset=80)
    track = estimate_pitch(AudioBuffer(0.5 * x, SR))
    sel = interior(track) & track.voiced
    assert sel.sum() > 0
    assert np.all(np.abs(track.f0[sel] - 100.0) < 1.0)


@pytest.mark.parametrize("f0", [80.0, 120.0, 220.0, 330.0, 400.0])
def test_pulse_trains_within_2_percent(f0):
    period = int(round(SR / f0))
    x, _ = impulse_train(period, int(SR * 0.8), offset=period // 2)
    track = estimate_pitch(AudioBuffer(0.5 * x, SR))
    true_f0 = SR / period
    sel = interior(track) & track.voiced
    ok = np.abs(track.f0[sel] - true_f0) < 0.02 * true_f0
    assert ok.mean() >= 0.95


def test_glottal_source_utterance():
    x, _ = voiced_utterance(140.0, SR, 1.0)
    track = estimate_pitch(AudioBuffer(x, SR))
    true_f0 = SR / round(SR / 140.0)
    sel = interior(track) & track.voiced
    ok = np.abs(track.f0[sel] - true_f0) < 0.02 * true_f0
    assert ok.mean() >= 0.95


def test_too_short_raises():
    with pytest.raises(SignalTooShort):
        estimate_pitch(AudioBuffer(np.zeros(500), SR))


def test_mean_t0_definition():
    t = np.arange(SR) / SR
    buf = AudioBuffer(0.3 * np.sin(2 * np.pi * 250 * t), SR)
    track = estimate_pitch(buf)
    manual = np.mean(1.0 / track.f0[track.voiced])
    assert track.mean_t0 == pytest.approx(manual)


def test_track_validation_catches_mismatch():
    track = AnalysisTrack(frame_hop=0.005,
                          f0=np.array([100.0, 0.0]),
                          voiced=np.array([True, True]))
    with pytest.raises(ValueError):
        track.validate()


def test_csv_exports(tmp_path):
    t = np.arange(SR) / SR
    buf = AudioBuffer(0.3 * np.sin(2 * np.pi * 200 * t), SR)
    track = estimate_pitch(buf)
    track.gci = np.array([100, 260, 420])
    write_track_csv(track, tmp_path / "track.csv")
    write_gci_csv(track, SR, tmp_path / "gci.csv")
    lines = (tmp_path / "track.csv").read_text().splitlines()
    assert lines[0] == "time_s,f0_hz,voiced"
    assert len(lines) == track.n_frames + 1
    glines = (tmp_path / "gci.csv").read_text().splitlines()
    assert glines[0] == "sample_index,time_s"
    assert glines[1].startswith("100,")
