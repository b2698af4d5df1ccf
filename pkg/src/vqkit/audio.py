"""WAV ingestion and emission.

Only RIFF/WAV is accepted: mono, PCM 16-bit or IEEE float, any rate >= 8 kHz.
Samples are held as float64 in [-1, 1].
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import CorruptHeader, MissingFile, UnsupportedFormat

MIN_SAMPLE_RATE = 8000


@dataclass(frozen=True)
class AudioBuffer:
    """Mono sample sequence plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise UnsupportedFormat("AudioBuffer holds mono signals only")
        if not np.all(np.isfinite(samples)):
            raise CorruptHeader("non-finite samples")
        if self.sample_rate < MIN_SAMPLE_RATE:
            raise UnsupportedFormat(
                f"sample rate {self.sample_rate} below {MIN_SAMPLE_RATE} Hz"
            )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_audio(path) -> AudioBuffer:
    """Read a mono PCM16/float WAV file into an AudioBuffer.

    Raises MissingFile, UnsupportedFormat (multichannel, unsupported codec,
    rate < 8 kHz) or CorruptHeader.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise MissingFile(str(path)) from None
    except ValueError as exc:
        # scipy reports unknown codecs as "Unknown wave file format: ..."
        if "format" in str(exc).lower():
            raise UnsupportedFormat(str(exc)) from None
        raise CorruptHeader(str(exc)) from None
    except Exception as exc:  # truncated RIFF chunks surface as struct errors
        raise CorruptHeader(str(exc)) from None

    if data.ndim != 1:
        raise UnsupportedFormat(f"{path.name}: expected mono, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedFormat(f"{path.name}: unsupported sample format {data.dtype}")
    if not np.all(np.isfinite(samples)):
        raise CorruptHeader(f"{path.name}: non-finite samples")
    if rate < MIN_SAMPLE_RATE:
        raise UnsupportedFormat(f"{path.name}: sample rate {rate} below 8 kHz")
    return AudioBuffer(samples=samples, sample_rate=int(rate))


def save_audio(buf: AudioBuffer, path, float32: bool = False, dither: bool = True,
               dither_seed: int = 0) -> None:
    """Write an AudioBuffer as WAV: PCM16 with TPDF dither (default) or float32.

    Dither is deterministic (seeded) so repeated runs emit identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.clip(buf.samples, -1.0, 1.0)
    if float32:
        wavfile.write(str(path), buf.sample_rate, x.astype(np.float32))
        return
    scaled = x * 32767.0
    if dither:
        rng = np.random.Generator(np.random.Philox(key=dither_seed))
        tpdf = rng.random(len(scaled)) - rng.random(len(scaled))
        scaled = scaled + tpdf
    pcm = np.clip(np.round(scaled), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), buf.sample_rate, pcm)
