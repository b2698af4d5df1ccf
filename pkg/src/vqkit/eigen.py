"""Orthonormal decomposition of pitch-normalized residual frames.

The frames arrive GCI-centered on a fixed normalized grid. After a small
circular re-alignment against the set mean, the dominant directions of the
second-moment matrix are extracted; the first one serves as the deterministic
excitation template for synthesis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewFrames
from .framing import NormalizedFrameSet

ALIGN_MAX_SHIFT = 5
MIN_FRAMES = 10


@dataclass
class EigenBasis:
    """Top directions of a residual frame set, largest variance first."""

    mean_frame: np.ndarray
    eigenvectors: np.ndarray   # (k, frame_length), unit rows
    eigenvalues: np.ndarray    # (k,), non-increasing, >= 0
    frame_length: int
    frame_count_used: int

    def __post_init__(self):
        self.mean_frame = np.asarray(self.mean_frame, dtype=np.float64)
        self.eigenvectors = np.atleast_2d(
            np.asarray(self.eigenvectors, dtype=np.float64))
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.eigenvectors.shape[1] != self.frame_length \
                or len(self.mean_frame) != self.frame_length:
            raise DimensionMismatch("basis vectors must match frame_length")
        if len(self.eigenvalues) != self.eigenvectors.shape[0]:
            raise DimensionMismatch("one eigenvalue per eigenvector")
        if np.any(np.diff(self.eigenvalues) > 1e-10):
            raise ValueError("eigenvalues must be non-increasing")
        if np.any(self.eigenvalues < -1e-10):
            raise ValueError("eigenvalues must be non-negative")
        gram = self.eigenvectors @ self.eigenvectors.T
        if np.max(np.abs(gram - np.eye(len(gram)))) > 1e-8:
            raise ValueError("eigenvectors must be orthonormal")

    @property
    def n_vectors(self) -> int:
        return self.eigenvectors.shape[0]


def _align_circular(frame: np.ndarray, reference: np.ndarray,
                    max_shift: int = ALIGN_MAX_SHIFT) -> np.ndarray:
    """Roll the frame within +/- max_shift to best match the reference."""
    best_lag = 0
    best_val = -np.inf
    for lag in range(-max_shift, max_shift + 1):
        val = float(reference @ np.roll(frame, lag))
        if val > best_val:
            best_val = val
            best_lag = lag
    return np.roll(frame, best_lag)


def compute_eigen_basis(frames: NormalizedFrameSet, k: int = 1) -> EigenBasis:
    """Top-k directions of the aligned frames' second-moment matrix.

    Alignment is two-pass: the plain frame mean is the fixed reference and
    every frame is circularly shifted against it, so the result does not
    depend on frame order. Polarity is canonical: each direction is signed so
    its largest-magnitude sample is negative, matching the convention that
    glottal closure shows as a negative residual spike.
    """
    if k < 1:
        raise ValueError("need at least one direction")
    n = frames.n_frames
    if n < max(k, MIN_FRAMES):
        raise TooFewFrames(f"{n} frames cannot support a {k}-direction basis")

    reference = frames.frames.mean(axis=0)
    aligned = np.array([_align_circular(f, reference) for f in frames.frames])

    moment = aligned.T @ aligned / n
    eigvals, eigvecs = np.linalg.eigh(moment)
    order = np.argsort(eigvals)[::-1][:k]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order].T
    for i in range(k):
        if eigvecs[i, np.argmax(np.abs(eigvecs[i]))] > 0:
            eigvecs[i] = -eigvecs[i]

    return EigenBasis(mean_frame=aligned.mean(axis=0),
                      eigenvectors=eigvecs,
                      eigenvalues=eigvals,
                      frame_length=frames.frame_length,
                      frame_count_used=n)


def project_and_reconstruct(frame: np.ndarray, basis: EigenBasis,
                            k: int) -> np.ndarray:
    """Reconstruct a frame from the mean plus its top-k projections."""
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) != basis.frame_length:
        raise DimensionMismatch("frame length does not match the basis grid")
    if k < 0 or k > basis.n_vectors:
        raise DimensionMismatch(f"k={k} outside the {basis.n_vectors} "
                                "available directions")
    if k == 0:
        return basis.mean_frame.copy()
    centered = frame - basis.mean_frame
    coefs = basis.eigenvectors[:k] @ centered
    return basis.mean_frame + coefs @ basis.eigenvectors[:k]
