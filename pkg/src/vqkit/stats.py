"""Per-label feature histograms and Jensen-Shannon separability.

All labels being compared share one equal-width bin grid per feature, sized
from the pooled data range, so the divergence is well defined. Divergence is
base-2, which bounds it to [0, 1].
"""

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import EmptyInput, GridMismatch, InsufficientData

FEATURE_NAMES = ("fg_over_f0", "naq", "qoq", "fm_hz")
DEFAULT_BIN_COUNT = 50
MIN_LABEL_SAMPLES = 100


@dataclass
class FeatureHistogram:
    """Normalized bin masses of one feature for one label."""

    feature_name: str
    bin_edges: np.ndarray
    probabilities: np.ndarray
    n_samples: int = 0
    n_clipped: int = 0

    def __post_init__(self):
        if self.feature_name not in FEATURE_NAMES:
            raise ValueError(f"unknown feature {self.feature_name!r}")
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.float64)
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if len(self.probabilities) != len(self.bin_edges) - 1:
            raise ValueError("need one probability per bin")
        if np.any(self.probabilities < 0):
            raise ValueError("bin masses cannot be negative")
        if abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("bin masses must sum to one")


@dataclass
class DivergenceTable:
    """Pairwise Jensen-Shannon divergence per feature, labels sorted."""

    label_pairs: list
    values: np.ndarray            # (n_pairs, len(features)) in [0, 1]
    features: tuple = FEATURE_NAMES

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.label_pairs), len(self.features)):
            raise ValueError("one row per label pair, one column per feature")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("divergence entries must lie in [0, 1]")

    def value(self, label_a: str, label_b: str, feature: str) -> float:
        pair = tuple(sorted((label_a, label_b)))
        row = self.label_pairs.index(pair)
        return float(self.values[row, self.features.index(feature)])


def build_histogram(values, edges, feature_name: str) -> FeatureHistogram:
    """Bin the finite values on the given grid, clipping strays into end bins."""
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if len(values) == 0:
        raise EmptyInput("no finite feature values to bin")
    edges = np.asarray(edges, dtype=np.float64)
    n_clipped = int(np.sum((values < edges[0]) | (values > edges[-1])))
    clipped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return FeatureHistogram(feature_name=feature_name,
                            bin_edges=edges,
                            probabilities=counts / counts.sum(),
                            n_samples=len(values),
                            n_clipped=n_clipped)


def js_divergence(a: FeatureHistogram, b: FeatureHistogram) -> float:
    """Base-2 Jensen-Shannon divergence between two histograms.

    Half the Kullback-Leibler divergence of each side against the midpoint
    distribution. Empty bins follow the 0 log 0 = 0 convention; a bin empty on
    both sides contributes nothing.
    """
    if a.feature_name != b.feature_name \
            or not np.array_equal(a.bin_edges, b.bin_edges):
        raise GridMismatch("histograms must share one feature and bin grid")
    p = a.probabilities
    q = b.probabilities
    m = 0.5 * (p + q)

    def half_kl(x):
        live = x > 0
        return float(np.sum(x[live] * np.log2(x[live] / m[live])))

    return max(0.5 * half_kl(p) + 0.5 * half_kl(q), 0.0)


def shared_edges(pooled_values, n_bins: int = DEFAULT_BIN_COUNT) -> np.ndarray:
    """Equal-width grid over the pooled range, widened if degenerate."""
    pooled = np.asarray(pooled_values, dtype=np.float64)
    pooled = pooled[np.isfinite(pooled)]
    if len(pooled) == 0:
        raise EmptyInput("no finite values to define a bin grid")
    lo = float(pooled.min())
    hi = float(pooled.max())
    if hi - lo <= 0:
        pad = max(abs(lo), 1.0) * 1e-9
        lo, hi = lo - pad, hi + pad
    return np.linspace(lo, hi, n_bins + 1)


def build_divergence_table(samples_by_label: dict,
                           n_bins: int = DEFAULT_BIN_COUNT,
                           min_samples: int = MIN_LABEL_SAMPLES) -> DivergenceTable:
    """All pairwise divergences on shared per-feature grids.

    samples_by_label maps label -> {feature_name: value array}. Every label
    needs at least min_samples finite values for every feature.
    """
    labels = sorted(samples_by_label)
    if len(labels) < 2:
        raise InsufficientData("divergence needs at least two labels")
    cleaned = {}
    for label in labels:
        cleaned[label] = {}
        for feat in FEATURE_NAMES:
            vals = np.asarray(samples_by_label[label].get(feat, ()),
                              dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            if len(vals) < min_samples:
                raise InsufficientData(
                    f"label {label!r} has {len(vals)} {feat} samples, "
                    f"needs {min_samples}")
            cleaned[label][feat] = vals

    pairs = list(combinations(labels, 2))
    values = np.zeros((len(pairs), len(FEATURE_NAMES)))
    for j, feat in enumerate(FEATURE_NAMES):
        edges = shared_edges(np.concatenate([cleaned[l][feat] for l in labels]),
                             n_bins)
        hists = {l: build_histogram(cleaned[l][feat], edges, feat)
                 for l in labels}
        for i, (la, lb) in enumerate(pairs):
            values[i, j] = js_divergence(hists[la], hists[lb])
    return DivergenceTable(label_pairs=pairs, values=values)


def write_divergence_csv(table: DivergenceTable, path) -> None:
    """One row per label pair, one column per feature."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label_a", "label_b", *table.features])
        for (la, lb), row in zip(table.label_pairs, table.values):
            writer.writerow([la, lb, *[repr(float(v)) for v in row]])


def write_histogram_csv(hist: FeatureHistogram, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "probability"])
        for lo, hi, p in zip(hist.bin_edges[:-1], hist.bin_edges[1:],
                             hist.probabilities):
            writer.writerow([repr(float(lo)), repr(float(hi)),
                             repr(float(p))])
