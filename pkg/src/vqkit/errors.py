"""Exception hierarchy shared by the whole toolkit.

Every error carries a short machine-readable ``code`` so the service layer can
map failures onto structured HTTP responses (and the CLI onto exit codes)
without string matching.
"""


class VqError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class ConfigError(VqError):
    """Invalid run configuration (bad ranges, unknown keys, missing paths)."""

    code = "config_error"


# --- audio ingestion ---------------------------------------------------------

class MissingFile(VqError):
    code = "missing_file"


class UnsupportedFormat(VqError):
    """Multichannel audio, unsupported codec, or sample rate below 8 kHz."""

    code = "unsupported_format"


class CorruptHeader(VqError):
    code = "corrupt_header"


# --- analysis ----------------------------------------------------------------

class SignalTooShort(VqError):
    code = "signal_too_short"


class NoVoicedRegion(VqError):
    code = "no_voiced_region"


class OrderTooHigh(VqError):
    code = "order_too_high"


class NoGci(VqError):
    code = "no_gci"


class ZeroFrame(VqError):
    code = "zero_frame"


class PhaseUnwrapFailure(VqError):
    """Unwrapped spectral phase failed the endpoint-residual consistency check."""

    code = "phase_unwrap_failure"


class NoPeakFound(VqError):
    code = "no_peak_found"


class DegenerateFlow(VqError):
    """Glottal-flow derivative is non-negative over the whole cycle."""

    code = "degenerate_flow"


class FrameTooShort(VqError):
    code = "frame_too_short"


class EmptyFrameSet(VqError):
    code = "empty_frame_set"


class NonFiniteSpectrum(VqError):
    code = "non_finite_spectrum"


class TooFewFrames(VqError):
    code = "too_few_frames"


class DimensionMismatch(VqError):
    code = "dimension_mismatch"


# --- statistics --------------------------------------------------------------

class EmptyInput(VqError):
    code = "empty_input"


class GridMismatch(VqError):
    code = "grid_mismatch"


class InsufficientData(VqError):
    code = "insufficient_data"


# --- synthesis ---------------------------------------------------------------

class EmptyParams(VqError):
    code = "empty_params"


class NoUsableAudio(VqError):
    """Raised by corpus commands when no input file could be processed."""

    code = "no_usable_audio"
