"""Pair- and triplet-based losses with analytic gradients with respect to D.

Every loss returns a :class:`LossResult` holding the batch value and the full
N x N matrix ∂L/∂D. Row i of that matrix collects anchor i's terms, so it is
generally not symmetric; :func:`pairweight.geometry.distance_backward`
accounts for both (i, j) and (j, i).

Batch reduction is the mean over the N anchors of the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidParams, InvalidTemperature, StructureViolation, WeightMiningMismatch
from .geometry import PairMask
from .mining import MinedPairs, MinedTriplets
from .weighting import PairWeights, TripletWeights


@dataclass(frozen=True)
class LossConfig:
    m1: float = 0.0
    m2: float = 0.8
    m: float = 0.1
    epsilon: float = 0.1
    ms_plus_one: bool = True

    def __post_init__(self):
        if not 0 <= self.m1 <= self.m2:
            raise InvalidParams(f"need 0 <= m1 <= m2, got m1={self.m1}, m2={self.m2}")
        if self.m < 0:
            raise InvalidParams(f"margin m must be >= 0, got {self.m}")
        if self.epsilon < 0:
            raise InvalidParams(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class LossResult:
    value: float
    grad: np.ndarray
    active: int = 0


def _n_anchors(d, n_anchors):
    return d.shape[0] if n_anchors is None else n_anchors


# ---------------------------------------------------------------------------
# general weighting losses
# ---------------------------------------------------------------------------

def general_pair_loss(d, mined: MinedPairs, weights: PairWeights, m1, m2,
                      n_anchors=None) -> LossResult:
    """Σ w+ [D - m1]_+ + Σ w- [m2 - D]_+ per anchor, averaged over anchors.

    The weights are constants here, so ∂L/∂D is the weight pattern itself:
    +w+/N on active positives and -w-/N on active negatives.
    """
    if (weights.pos.shape != d.shape
            or not np.array_equal(weights.pos_mask, mined.pos)
            or not np.array_equal(weights.neg_mask, mined.neg)):
        raise WeightMiningMismatch("weights were not computed from these mined pairs")
    value, grad = kernels.weighted_pair_loss(d, mined.pos, mined.neg, weights.pos, weights.neg,
                                             float(m1), float(m2), _n_anchors(d, n_anchors))
    active = int(np.count_nonzero(mined.pos & (d >= m1)) + np.count_nonzero(mined.neg & (d <= m2)))
    return LossResult(value, grad, active)


def general_triplet_loss(d, triplets: MinedTriplets, weights: TripletWeights, m,
                         n_anchors=None) -> LossResult:
    """Σ w_ijk [D_ij - D_ik + m]_+ per anchor, averaged over anchors."""
    if weights.triplets.shape != triplets.triplets.shape or not np.array_equal(
            weights.triplets, triplets.triplets):
        raise WeightMiningMismatch("weights were not computed from these triplets")
    return _triplet_result(d, triplets.triplets, weights.values, m, n_anchors)


def _triplet_result(d, t, w, m, n_anchors):
    value, grad = kernels.weighted_triplet_loss(d, t, w, float(m), _n_anchors(d, n_anchors))
    active = 0
    if len(t):
        active = int(np.count_nonzero(d[t[:, 0], t[:, 1]] - d[t[:, 0], t[:, 2]] + m >= 0))
    return LossResult(value, grad, active)


# ---------------------------------------------------------------------------
# reviewed losses
# ---------------------------------------------------------------------------

def contrastive_loss(d, mask: PairMask, m, n_anchors=None) -> LossResult:
    """Σ D_ij over positives + Σ [m - D_ij]_+ over negatives."""
    if m < 0:
        raise InvalidParams("margin must be >= 0")
    ones = np.ones_like(d)
    value, grad = kernels.weighted_pair_loss(d, mask.positive, mask.negative, ones, ones,
                                             0.0, float(m), _n_anchors(d, n_anchors))
    active = int(np.count_nonzero(mask.positive) + np.count_nonzero(mask.negative & (d <= m)))
    return LossResult(value, grad, active)


def triplet_loss(d, triplets: MinedTriplets, m, n_anchors=None) -> LossResult:
    t = triplets.triplets
    return _triplet_result(d, t, np.ones(len(t)), m, n_anchors)


def npair_pairs(labels):
    """(anchor, positive) index per class, in order of first appearance.

    Raises :class:`StructureViolation` unless every class appears exactly twice.
    """
    labels = np.asarray(labels)
    classes, first, counts = np.unique(labels, return_index=True, return_counts=True)
    if np.any(counts != 2) or classes.size < 2:
        raise StructureViolation("N-pair batches need >= 2 classes with exactly two samples each")
    order = np.argsort(first)
    pairs = [np.flatnonzero(labels == c) for c in classes[order]]
    return np.array(pairs, dtype=np.int64)


def npair_loss(d, labels) -> LossResult:
    """Σ_i log(1 + Σ_{k≠i} exp(D_ii+ - D_ik+)), averaged over the pairs.

    Anchor i is the first sample of class i, its positive the second; the
    negatives of anchor i are the positives of every other class.
    """
    pairs = npair_pairs(labels)
    n_pairs = len(pairs)
    anchors, positives = pairs[:, 0], pairs[:, 1]
    grad = np.zeros_like(d)
    total = 0.0
    for c in range(n_pairs):
        a, p = anchors[c], positives[c]
        negs = np.delete(positives, c)
        x = d[a, p] - d[a, negs]
        top = max(0.0, float(x.max()))
        s = np.exp(-top) + np.exp(x - top).sum()
        total += top + np.log(s)
        w = np.exp(x - top) / s
        grad[a, p] += w.sum()
        grad[a, negs] -= w
    return LossResult(total / n_pairs, grad / n_pairs, n_pairs)


def _row_lse_softmax(args, mask):
    """Per-row log-sum-exp over masked entries and the matching softmax."""
    has = mask.any(axis=1)
    top = np.where(has, np.where(mask, args, -np.inf).max(axis=1), 0.0)
    e = np.where(mask, np.exp(np.where(mask, args - top[:, None], 0.0)), 0.0)
    s = e.sum(axis=1)
    with np.errstate(divide="ignore"):
        lse = np.where(has, top + np.log(np.where(has, s, 1.0)), -np.inf)
    soft = e / np.where(has, s, 1.0)[:, None]
    return lse, soft


def lifted_structured_loss(d, mask: PairMask, m, n_anchors=None) -> LossResult:
    """Σ over ordered positive pairs of [D_ij + LSE_i + LSE_j]_+.

    LSE_r = log Σ_{k: y_rk = 0} exp(m - D_rk). The hinge is not squared.
    """
    if m < 0:
        raise InvalidParams("margin must be >= 0")
    n = _n_anchors(d, n_anchors)
    lse, soft = _row_lse_softmax(m - d, mask.negative)
    arg = d + lse[:, None] + lse[None, :]
    act = mask.positive & np.isfinite(arg) & (arg >= 0.0)
    value = np.where(act, arg, 0.0).sum(axis=1).sum()
    uses = act.sum(axis=1) + act.sum(axis=0)
    grad = act.astype(np.float64) - uses[:, None] * soft
    return LossResult(float(value / n), grad / n, int(act.sum()))


def _ms_terms(args, mask, temperature, plus_one):
    has = mask.any(axis=1)
    top = np.where(has, np.where(mask, args, -np.inf).max(axis=1), 0.0)
    if plus_one:
        top = np.maximum(top, 0.0)
    s = np.where(mask, np.exp(np.where(mask, args - top[:, None], 0.0)), 0.0).sum(axis=1)
    if plus_one:
        s = s + np.exp(-top)
    ok = has | plus_one
    lse = np.where(ok, top + np.log(np.where(ok, s, 1.0)), 0.0)
    w = np.where(mask, np.exp(np.where(mask, args, 0.0) - lse[:, None]), 0.0)
    return np.where(ok, lse / temperature, 0.0), w


def multi_similarity_loss(d, mined: MinedPairs, alpha, beta, m, plus_one=True,
                          n_anchors=None) -> LossResult:
    """Multi-similarity loss in distance form.

    Per anchor: (1/α) log[1 + Σ_pos exp(α(D - m))] + (1/β) log[1 + Σ_neg exp(β(m - D))].
    With ``plus_one=False`` the leading 1 is dropped (an empty set then adds 0).
    ∂L/∂D is +exp(α(D - m)) / (1 + Σ ...) on positives and the negated
    analogue on negatives.
    """
    if alpha <= 0 or beta <= 0:
        raise InvalidTemperature(f"alpha and beta must be > 0, got {alpha}, {beta}")
    n = _n_anchors(d, n_anchors)
    pos_term, wp = _ms_terms(alpha * (d - m), mined.pos, alpha, plus_one)
    neg_term, wn = _ms_terms(beta * (m - d), mined.neg, beta, plus_one)
    value = (pos_term + neg_term).sum()
    active = int(mined.pos.sum() + mined.neg.sum())
    return LossResult(float(value / n), (wp - wn) / n, active)


# ---------------------------------------------------------------------------
# square-distance variants
# ---------------------------------------------------------------------------

def square_pair_loss(d, mined: MinedPairs, m1, m2, n_anchors=None) -> LossResult:
    """Σ [D² - m1]_+ + Σ [m2 - D²]_+; gradient ±2D on active pairs."""
    sq = d * d
    ones = np.ones_like(d)
    value, g = kernels.weighted_pair_loss(sq, mined.pos, mined.neg, ones, ones,
                                          float(m1), float(m2), _n_anchors(d, n_anchors))
    active = int(np.count_nonzero(mined.pos & (sq >= m1)) + np.count_nonzero(mined.neg & (sq <= m2)))
    return LossResult(value, g * (2.0 * d), active)


def square_contrastive_loss(d, mask: PairMask, m1, m2, n_anchors=None) -> LossResult:
    """Σ [D - m1]_+² + Σ [m2 - D]_+²; gradient 2(D - m1) and -2(m2 - D)."""
    hp = np.maximum(d - m1, 0.0)
    hn = np.maximum(m2 - d, 0.0)
    value, g = kernels.weighted_pair_loss(d, mask.positive, mask.negative, hp, hn,
                                          float(m1), float(m2), _n_anchors(d, n_anchors))
    active = int(np.count_nonzero(mask.positive & (d >= m1)) + np.count_nonzero(mask.negative & (d <= m2)))
    return LossResult(value, 2.0 * g, active)


def square_triplet_loss(d, triplets: MinedTriplets, m, n_anchors=None) -> LossResult:
    """Σ [D_ij² - D_ik² + m]_+; gradient +2D_ij and -2D_ik on active triplets."""
    t = triplets.triplets
    res = _triplet_result(d * d, t, np.ones(len(t)), m, n_anchors)
    return LossResult(res.value, res.grad * (2.0 * d), res.active)
