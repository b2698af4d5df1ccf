"""Voice-quality presets: the stored per-quality transformation data.

A preset bundles everything the synthesizer needs to impose one voice
quality: the excitation template (eigenresidual), the maximum voiced
frequency that splits the deterministic and stochastic bands, and the
averaged-spectrum summary that drives tilt filtering. Presets serialize to
JSON with full-precision decimal floats so files round-trip byte-identically.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .errors import ConfigError, DimensionMismatch, MissingFile
from .lpc import is_stable
from .tilt import ArModel, AveragedSpectrum, TiltFilter

FORMAT_VERSION = 1
MAX_FM_HZ = 12000.0

PRESET_SCHEMA = {
    "type": "object",
    "required": ["format_version", "label", "fm_hz", "reference_mean_f0",
                 "eigenresidual", "tilt", "averaged_spectrum"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"type": "integer", "minimum": 1},
        "label": {"type": "string", "minLength": 1},
        "fm_hz": {"type": "number", "exclusiveMinimum": 0,
                  "maximum": MAX_FM_HZ},
        "reference_mean_f0": {"type": "number", "exclusiveMinimum": 0},
        "eigenresidual": {
            "type": "object",
            "required": ["frame_length", "samples"],
            "additionalProperties": False,
            "properties": {
                "frame_length": {"type": "integer", "minimum": 32},
                "samples": {"type": "array", "minItems": 32,
                            "items": {"type": "number"}},
                "mean_frame": {"type": "array",
                               "items": {"type": "number"}},
                "eigenvalue_share": {"type": "number", "minimum": 0,
                                     "maximum": 1},
            },
        },
        "tilt": {
            "type": "object",
            "required": ["order", "source_free", "ar_coefficients", "gain"],
            "additionalProperties": False,
            "properties": {
                "order": {"type": "integer", "minimum": 2},
                "source_free": {"type": "boolean"},
                "ar_coefficients": {"type": "array", "minItems": 3,
                                    "items": {"type": "number"}},
                "gain": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "averaged_spectrum": {
            "type": "object",
            "required": ["bins"],
            "additionalProperties": False,
            "properties": {
                "bins": {"type": "array", "minItems": 2,
                         "items": {"type": "number", "minimum": 0}},
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(PRESET_SCHEMA)


@dataclass
class VoiceQualityPreset:
    """One voice quality's excitation template and band/tilt statistics."""

    label: str
    fm_hz: float
    reference_mean_f0: float
    eigenresidual: np.ndarray
    frame_length: int
    tilt_model: ArModel
    spectrum_bins: np.ndarray
    source_free: bool = True
    mean_frame: np.ndarray = None
    eigenvalue_share: float = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.eigenresidual = np.asarray(self.eigenresidual, dtype=np.float64)
        self.spectrum_bins = np.asarray(self.spectrum_bins, dtype=np.float64)
        if self.mean_frame is not None:
            self.mean_frame = np.asarray(self.mean_frame, dtype=np.float64)
            if len(self.mean_frame) != self.frame_length:
                raise DimensionMismatch("mean frame must match frame_length")
        if len(self.eigenresidual) != self.frame_length:
            raise DimensionMismatch("eigenresidual must match frame_length")
        if len(self.spectrum_bins) != self.frame_length // 2 + 1:
            raise DimensionMismatch("spectrum bins must match the one-sided "
                                    "grid of frame_length")
        if abs(float(np.linalg.norm(self.eigenresidual)) - 1.0) > 1e-8:
            raise ValueError("eigenresidual must have unit norm")
        if not 0.0 < self.fm_hz <= MAX_FM_HZ:
            raise ValueError(f"fm_hz must lie in (0, {MAX_FM_HZ:.0f}]")
        if self.reference_mean_f0 <= 0:
            raise ValueError("reference_mean_f0 must be positive")
        if not is_stable(self.tilt_model.coefficients):
            raise ValueError("preset tilt model must be stable")

    @property
    def spectrum(self) -> AveragedSpectrum:
        return AveragedSpectrum(bins=self.spectrum_bins, frame_count=1,
                                frame_length=self.frame_length)


def tilt_between(source: "VoiceQualityPreset",
                 target: "VoiceQualityPreset") -> TiltFilter:
    """Ratio filter from the two presets' stored spectral summaries."""
    if source.frame_length != target.frame_length:
        raise DimensionMismatch("presets use different normalized grids")
    return TiltFilter(source_ar=source.tilt_model,
                      target_ar=target.tilt_model,
                      order=source.tilt_model.order)


def preset_to_dict(preset: VoiceQualityPreset) -> dict:
    eig = {
        "frame_length": int(preset.frame_length),
        "samples": [float(v) for v in preset.eigenresidual],
    }
    if preset.mean_frame is not None:
        eig["mean_frame"] = [float(v) for v in preset.mean_frame]
    if preset.eigenvalue_share is not None:
        eig["eigenvalue_share"] = float(preset.eigenvalue_share)
    return {
        "format_version": int(preset.format_version),
        "label": preset.label,
        "fm_hz": float(preset.fm_hz),
        "reference_mean_f0": float(preset.reference_mean_f0),
        "eigenresidual": eig,
        "tilt": {
            "order": int(preset.tilt_model.order),
            "source_free": bool(preset.source_free),
            "ar_coefficients": [float(v)
                                for v in preset.tilt_model.coefficients],
            "gain": float(preset.tilt_model.gain),
        },
        "averaged_spectrum": {
            "bins": [float(v) for v in preset.spectrum_bins],
        },
    }


def preset_from_dict(data: dict) -> VoiceQualityPreset:
    """Validate against the schema and rebuild the preset."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        where = "/".join(str(p) for p in errors[0].path) or "(root)"
        raise ConfigError(f"preset file invalid at {where}: "
                          f"{errors[0].message}")
    tilt = data["tilt"]
    coefs = np.asarray(tilt["ar_coefficients"], dtype=np.float64)
    if len(coefs) != tilt["order"] + 1:
        raise ConfigError("tilt order does not match its coefficient count")
    if coefs[0] != 1.0:
        raise ConfigError("tilt model must be monic")
    eig = data["eigenresidual"]
    try:
        return VoiceQualityPreset(
            label=data["label"],
            fm_hz=float(data["fm_hz"]),
            reference_mean_f0=float(data["reference_mean_f0"]),
            eigenresidual=np.asarray(eig["samples"], dtype=np.float64),
            frame_length=int(eig["frame_length"]),
            tilt_model=ArModel(coefficients=coefs,
                               gain=float(tilt["gain"])),
            spectrum_bins=np.asarray(data["averaged_spectrum"]["bins"],
                                     dtype=np.float64),
            source_free=bool(tilt["source_free"]),
            mean_frame=eig.get("mean_frame"),
            eigenvalue_share=eig.get("eigenvalue_share"),
            format_version=int(data["format_version"]),
        )
    except (ValueError, DimensionMismatch) as exc:
        raise ConfigError(f"preset violates an invariant: {exc}") from exc


def save_preset(preset: VoiceQualityPreset, path) -> None:
    """Write the preset as indented JSON with full-precision floats."""
    path = Path(path)
    with path.open("w") as fh:
        json.dump(preset_to_dict(preset), fh, indent=2)
        fh.write("\n")


def load_preset(path) -> VoiceQualityPreset:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"preset file not found: {path}")
    try:
        with path.open() as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"preset file is not valid JSON: {exc}") from exc
    return preset_from_dict(data)
