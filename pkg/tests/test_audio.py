import numpy as np
import pytest

from vqkit.audio import AudioBuffer, load_audio, save_audio
from vqkit.errors import CorruptHeader, MissingFile, UnsupportedFormat

SR = 16000


def test_load_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_audio(tmp_path / "nope.wav")


def test_pcm16_round_trip(tmp_wav):
    pcm = (np.sin(2 * np.pi * 220 * np.arange(SR) / SR) * 20000).astype(np.int16)
    buf = load_audio(tmp_wav("tone.wav", pcm))
    assert len(buf) == SR
    assert buf.sample_rate == SR
    assert np.max(np.abs(buf.samples)) <= 1.0
    assert np.allclose(buf.samples, pcm / 32768.0)


def test_float32_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.9, 0.9, 4000)
    save_audio(AudioBuffer(x, SR), tmp_path / "f.wav", float32=True)
    back = load_audio(tmp_path / "f.wav")
    assert np.allclose(back.samples, x, atol=1e-6)


def test_pcm16_write_quantization(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5, 0.5, 4000)
    save_audio(AudioBuffer(x, SR), tmp_path / "q.wav")
    back = load_audio(tmp_path / "q.wav")
    # rounding plus one LSB of triangular dither
    assert np.max(np.abs(back.samples - x)) < 2.0 / 32768.0


def test_dither_is_deterministic(tmp_path):
    x = np.sin(2 * np.pi * 300 * np.arange(2000) / SR) * 0.3
    save_audio(AudioBuffer(x, SR), tmp_path / "a.wav")
    save_audio(AudioBuffer(x, SR), tmp_path / "b.wav")
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


def test_stereo_rejected(tmp_wav):
    stereo = np.zeros((1000, 2), dtype=np.int16)
    with pytest.raises(UnsupportedFormat):
        load_audio(tmp_wav("stereo.wav", stereo))


def test_8k_rate_accepted(tmp_wav):
    buf = load_audio(tmp_wav("low.wav", np.zeros(8000, dtype=np.int16), sr=8000))
    assert buf.sample_rate == 8000


def test_below_8k_rejected(tmp_wav):
    with pytest.raises(UnsupportedFormat):
        load_audio(tmp_wav("tiny.wav", np.zeros(4000, dtype=np.int16), sr=4000))


def test_unsupported_sample_width(tmp_wav):
    with pytest.raises(UnsupportedFormat):
        load_audio(tmp_wav("wide.wav", np.zeros(1000, dtype=np.int32)))


def test_truncated_file_rejected(tmp_path):
    p = tmp_path / "trunc.wav"
    p.write_bytes(b"RIFF\x24\x00\x00\x00WAVEfmt ")
    with pytest.raises((CorruptHeader, UnsupportedFormat)):
        load_audio(p)


def test_buffer_rejects_nan():
    with pytest.raises(CorruptHeader):
        AudioBuffer(np.array([0.0, np.nan]), SR)


def test_buffer_rejects_stereo_array():
    with pytest.raises(UnsupportedFormat):
        AudioBuffer(np.zeros((10, 2)), SR)


def test_buffer_duration():
    assert AudioBuffer(np.zeros(8000), SR).duration == pytest.approx(0.5)
