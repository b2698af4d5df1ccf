import numpy as np
import pytest

from conftest import voiced_utterance
from vqkit.audio import AudioBuffer
from vqkit.errors import EmptyFrameSet, FrameTooShort, NoGci, ZeroFrame
from vqkit.framing import (
    extract_gci_frames,
    normalize_frame,
    resample_sinc,
    NormalizedFrameSet,
)
from vqkit.gci import detect_gci
from vqkit.pitch import estimate_pitch

SR = 16000


@pytest.fixture(scope="module")
def analyzed():
    x, _ = voiced_utterance(130.0, SR, 1.0)
    buf = AudioBuffer(x, SR)
    track = detect_gci(buf, estimate_pitch(buf))
    return buf, track


def test_resample_preserves_shape_against_dense_oracle():
    # 160-sample two-period span onto 200 points, checked against an
    # extremely dense Fourier-free linear interpolation of a smooth signal
    t = np.arange(160) / 160
    x = np.sin(2 * np.pi * 2 * t) * np.hanning(160)
    y = resample_sinc(x, 200)
    assert len(y) == 200
    dense_t = np.arange(200) * (160 - 1) / (200 - 1)
    fine = np.arange(0, 160, 1 / 64)
    xf = np.interp(fine, np.arange(160.0),  x)
    oracle = np.interp(dense_t, fine, xf)
    c = np.corrcoef(y, oracle)[0, 1]
    assert c > 0.999


def test_resample_identity():
    x = np.random.default_rng(0).standard_normal(100)
    assert np.array_equal(resample_sinc(x, 100), x)


def test_resample_endpoints_map():
    x = np.linspace(-1.0, 1.0, 50)
    y = resample_sinc(x, 128)
    assert y[0] == pytest.approx(x[0], abs=1e-6)
    assert y[-1] == pytest.approx(x[-1], abs=1e-6)
    # a straight line stays straight under band-limited resampling
    assert np.max(np.abs(y - np.linspace(-1.0, 1.0, 128))) < 1e-3


def test_resample_too_short():
    with pytest.raises(FrameTooShort):
        resample_sinc(np.array([1.0]), 50)


def test_resample_downsample_antialiases():
    # content right at the old Nyquist cannot survive a 2x shrink
    x = np.cos(np.pi * np.arange(400))
    y = resample_sinc(x, 200)
    assert np.max(np.abs(y[20:-20])) < 0.1


def test_normalize_frame_unit_energy():
    x = np.random.default_rng(1).standard_normal(200)
    y = normalize_frame(x)
    assert np.sum(y ** 2) == pytest.approx(1.0, abs=1e-12)


def test_normalize_zero_frame_raises():
    with pytest.raises(ZeroFrame):
        normalize_frame(np.zeros(200))


def test_extract_frames_contract(analyzed):
    buf, track = analyzed
    fs = extract_gci_frames(buf, track, 200)
    assert isinstance(fs, NormalizedFrameSet)
    assert fs.frames.shape[1] == 200
    assert fs.n_frames > 0
    energies = np.sum(fs.frames ** 2, axis=1)
    assert np.allclose(energies, 1.0, atol=1e-9)
    # Hanning endpoints
    assert np.max(np.abs(fs.frames[:, 0])) < 0.05
    assert np.max(np.abs(fs.frames[:, -1])) < 0.05


def test_extract_frames_deterministic(analyzed):
    buf, track = analyzed
    a = extract_gci_frames(buf, track, 200)
    b = extract_gci_frames(buf, track, 200)
    assert np.array_equal(a.frames, b.frames)


def test_extract_requires_gci(analyzed):
    buf, track = analyzed
    from dataclasses import replace
    bare = replace(track, gci=np.array([], dtype=int))
    with pytest.raises(NoGci):
        extract_gci_frames(buf, bare, 200)


def test_extract_odd_length_rejected(analyzed):
    buf, track = analyzed
    with pytest.raises(ValueError):
        extract_gci_frames(buf, track, 201)


def test_edge_gcis_skipped():
    x, _ = voiced_utterance(130.0, SR, 1.0)
    buf = AudioBuffer(x, SR)
    track = detect_gci(buf, estimate_pitch(buf))
    # move one GCI right next to the signal edge
    from dataclasses import replace
    hacked = np.concatenate([[3], track.gci])
    t2 = replace(track, gci=hacked)
    fs = extract_gci_frames(buf, t2, 200)
    assert fs.skipped_edge >= 1


def test_all_gcis_unusable():
    x, _ = voiced_utterance(130.0, SR, 1.0)
    buf = AudioBuffer(x, SR)
    track = detect_gci(buf, estimate_pitch(buf))
    from dataclasses import replace
    t2 = replace(track, gci=np.array([1, 2]))
    with pytest.raises(EmptyFrameSet):
        extract_gci_frames(buf, t2, 200)
