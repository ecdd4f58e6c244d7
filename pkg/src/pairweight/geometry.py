"""Embedding batches, L2 normalization, Euclidean distance matrices and pair masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateRow, ShapeMismatch

NORM_FLOOR = 1e-12
EPS_D = 1e-12


@dataclass(frozen=True)
class NormCache:
    """What ``l2_normalize_backward`` needs: the unit rows and their original norms."""

    normalized: np.ndarray
    norms: np.ndarray


@dataclass(frozen=True)
class PairMask:
    positive: np.ndarray
    negative: np.ndarray

    @property
    def size(self):
        return self.positive.shape[0]


@dataclass(frozen=True)
class EmbeddingBatch:
    raw: np.ndarray
    normalized: np.ndarray
    labels: np.ndarray
    cache: NormCache

    @classmethod
    def from_raw(cls, raw, labels) -> "EmbeddingBatch":
        raw = np.asarray(raw, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if raw.ndim != 2 or raw.shape[0] < 2 or raw.shape[1] < 1:
            raise ShapeMismatch(f"need an N x d batch with N >= 2, d >= 1; got {raw.shape}")
        if labels.shape != (raw.shape[0],):
            raise ShapeMismatch(f"labels shape {labels.shape} does not match N={raw.shape[0]}")
        normalized, cache = l2_normalize(raw)
        return cls(raw, normalized, labels, cache)

    def distances(self) -> np.ndarray:
        return pairwise_distances(self.normalized)

    def mask(self) -> PairMask:
        return pair_mask(self.labels)


def l2_normalize(raw):
    """Divide every row by its Euclidean norm.

    Returns the normalized matrix and a :class:`NormCache` for the backward
    pass. Rows with norm below 1e-12 raise :class:`DegenerateRow` rather than
    being silently patched.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d array, got shape {raw.shape}")
    norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
    bad = np.flatnonzero(norms < NORM_FLOOR)
    if bad.size:
        raise DegenerateRow(bad.tolist())
    out = raw / norms[:, None]
    return out, NormCache(out, norms)


def l2_normalize_backward(grad_normalized, cache: NormCache):
    """Vector-Jacobian product of row normalization: (I - z z^T) g / ||x|| per row."""
    g = np.asarray(grad_normalized, dtype=np.float64)
    if g.shape != cache.normalized.shape:
        raise ShapeMismatch(f"gradient shape {g.shape} != cached shape {cache.normalized.shape}")
    z = cache.normalized
    radial = np.einsum("ij,ij->i", g, z)
    return (g - z * radial[:, None]) / cache.norms[:, None]


def pairwise_distances(normalized):
    z = np.asarray(normalized, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d array, got shape {z.shape}")
    return kernels.pairwise_distances(z)


def distance_backward(grad_d, normalized, d):
    """Chain ∂L/∂D into ∂L/∂z.

    Each entry ``grad_d[i, j]`` adds ``grad_d[i, j] * (z_i - z_j) / D_ij`` to
    row i and the negation to row j. Pairs closer than 1e-12 contribute
    nothing (subgradient choice at the D = 0 singularity).
    """
    z = np.asarray(normalized, dtype=np.float64)
    grad_d = np.asarray(grad_d, dtype=np.float64)
    n = z.shape[0]
    if grad_d.shape != (n, n) or np.shape(d) != (n, n):
        raise ShapeMismatch("distance gradient and distance matrix must be N x N")
    return kernels.distance_backward(grad_d, z, np.asarray(d, dtype=np.float64))


def pair_mask(labels) -> PairMask:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] < 2:
        raise ShapeMismatch("pair_mask needs at least two labels")
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(labels.shape[0], dtype=bool)
    return PairMask(positive=same & off, negative=~same)
