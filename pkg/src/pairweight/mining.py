"""Mini-batch samplers and informative pair / triplet mining."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    BatchTooLarge,
    InsufficientClasses,
    InsufficientSamplesPerClass,
    InvalidParams,
    InvalidThresholds,
    NegativeMargin,
)
from .geometry import PairMask


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    mode: Literal["random", "pk"] = "pk"
    P: int = 16
    K: int = 5
    batch_size: int = 80
    seed: int = 0

    def __post_init__(self):
        if self.mode == "pk":
            if self.P < 2 or self.K < 2:
                raise InvalidParams(f"pk sampler needs P >= 2 and K >= 2, got P={self.P}, K={self.K}")
        elif self.mode == "random":
            if self.batch_size < 2:
                raise InvalidParams(f"random sampler needs batch_size >= 2, got {self.batch_size}")
        else:
            raise InvalidParams(f"unknown sampler mode {self.mode!r}")

    @property
    def size(self):
        return self.P * self.K if self.mode == "pk" else self.batch_size


def pk_sample(labels, P: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """Draw P classes, then K distinct indices from each; class-major order."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < P:
        raise InsufficientClasses(f"need {P} classes, dataset has {classes.size}")
    eligible = classes[counts >= K]
    if eligible.size < P:
        raise InsufficientSamplesPerClass(
            f"need {P} classes with >= {K} samples, only {eligible.size} qualify")
    chosen = rng.choice(eligible, size=P, replace=False)
    batch = [rng.choice(np.flatnonzero(labels == c), size=K, replace=False) for c in chosen]
    return np.concatenate(batch).astype(np.int64)


def random_sample(n: int, B: int, rng: np.random.Generator) -> np.ndarray:
    if B > n:
        raise BatchTooLarge(f"batch size {B} exceeds dataset size {n}")
    if B < 1:
        raise InvalidParams("batch size must be positive")
    return rng.choice(n, size=B, replace=False).astype(np.int64)


class Sampler:
    """Stateful batch sampler; owns its RNG, so use one per training thread."""

    def __init__(self, labels, config: SamplerConfig):
        self.labels = np.asarray(labels)
        self.config = config
        self.rng = np.random.default_rng(config.seed)

    def __iter__(self):
        return self

    def __next__(self) -> np.ndarray:
        if self.config.mode == "pk":
            return pk_sample(self.labels, self.config.P, self.config.K, self.rng)
        return random_sample(self.labels.size, self.config.batch_size, self.rng)

    def batches_per_epoch(self) -> int:
        return max(1, int(np.ceil(self.labels.size / self.config.size)))


# ---------------------------------------------------------------------------
# mined sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinedPairs:
    """Per-anchor selections as N x N boolean masks (row = anchor)."""

    pos: np.ndarray
    neg: np.ndarray

    def positives(self, i):
        return np.flatnonzero(self.pos[i])

    def negatives(self, i):
        return np.flatnonzero(self.neg[i])

    def as_sets(self):
        """{anchor: (set of positives, set of negatives)} for every anchor."""
        return {i: (set(self.positives(i).tolist()), set(self.negatives(i).tolist()))
                for i in range(self.pos.shape[0])}

    def intersect(self, other: "MinedPairs") -> "MinedPairs":
        return MinedPairs(self.pos & other.pos, self.neg & other.neg)

    @property
    def empty(self):
        return not (self.pos.any() or self.neg.any())


@dataclass(frozen=True)
class MinedTriplets:
    triplets: np.ndarray  # (T, 3) int64 rows of (anchor, positive, negative)
    skipped: tuple = field(default=())

    def __len__(self):
        return len(self.triplets)

    def as_set(self):
        return {tuple(t) for t in self.triplets.tolist()}


def _empty_triplets(skipped=()):
    return MinedTriplets(np.zeros((0, 3), dtype=np.int64), tuple(skipped))


def triplet_slack(d, i, j, k, margin):
    """Hinge argument D_ij - D_ik + m; mining and weighting share this form."""
    return d[i, j] - d[i, k] + margin


# ---------------------------------------------------------------------------
# mining strategies
# ---------------------------------------------------------------------------

def mine_thresholds(d, mask: PairMask, m1: float, m2: float) -> MinedPairs:
    """Positives with D >= m1, negatives with D <= m2."""
    if m1 < 0 or m1 > m2:
        raise InvalidThresholds(f"need 0 <= m1 <= m2, got m1={m1}, m2={m2}")
    return MinedPairs(mask.positive & (d >= m1), mask.negative & (d <= m2))


def mine_triplet_margin(d, mask: PairMask, m: float) -> MinedTriplets:
    """Every (i, j, k) with y_ij = 1, y_ik = 0 and D_ij + m >= D_ik."""
    if m < 0:
        raise NegativeMargin(f"margin must be >= 0, got {m}")
    i, j, k = np.nonzero(mask.positive[:, :, None] & mask.negative[:, None, :])
    keep = triplet_slack(d, i, j, k, m) >= 0.0
    return MinedTriplets(np.stack([i[keep], j[keep], k[keep]], axis=1).astype(np.int64))


def all_triplets(mask: PairMask) -> MinedTriplets:
    i, j, k = np.nonzero(mask.positive[:, :, None] & mask.negative[:, None, :])
    return MinedTriplets(np.stack([i, j, k], axis=1).astype(np.int64))


def mine_hardest_triplets(d, mask: PairMask) -> MinedTriplets:
    """One triplet per anchor: farthest positive and farthest negative.

    Both selections use argmax, so the negative is the farthest one (the
    classical batch-hard variant takes the closest negative). Ties go
    to the lowest index. Anchors without a positive or a negative are
    recorded in ``skipped``.
    """
    rows, skipped = [], []
    for i in range(d.shape[0]):
        pos = np.flatnonzero(mask.positive[i])
        neg = np.flatnonzero(mask.negative[i])
        if pos.size == 0 or neg.size == 0:
            skipped.append(i)
            continue
        rows.append((i, pos[np.argmax(d[i, pos])], neg[np.argmax(d[i, neg])]))
    if not rows:
        return _empty_triplets(skipped)
    return MinedTriplets(np.array(rows, dtype=np.int64), tuple(skipped))


def mine_ms(d, mask: PairMask, epsilon: float) -> MinedPairs:
    """Relative mining: compare each pair against the anchor's hardest opposite pair.

    Keeps positives with D_ij >= min_neg - eps and negatives with
    D_ik <= max_pos + eps. Anchors lacking positives or negatives keep nothing.
    """
    if epsilon < 0:
        raise InvalidParams(f"epsilon must be >= 0, got {epsilon}")
    pos, neg = mask.positive, mask.negative
    usable = pos.any(axis=1) & neg.any(axis=1)
    min_neg = np.where(neg, d, np.inf).min(axis=1)
    max_pos = np.where(pos, d, -np.inf).max(axis=1)
    keep_pos = pos & (d >= (min_neg - epsilon)[:, None]) & usable[:, None]
    keep_neg = neg & (d <= (max_pos + epsilon)[:, None]) & usable[:, None]
    return MinedPairs(keep_pos, keep_neg)
