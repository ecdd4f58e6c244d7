"""Pair and triplet weights: constant, p-th power and exponential, optionally normalized.

Weights are plain arrays computed from distance values; nothing downstream
differentiates through them.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .errors import InvalidParams, PreconditionViolation
from .mining import MinedPairs, MinedTriplets, triplet_slack

EXP_CLAMP = 50.0

Variant = Literal["constant", "power", "exponential"]


@dataclass(frozen=True)
class WeightScheme:
    variant: Variant = "constant"
    p: float = 0.0
    q: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    normalize: bool = True
    norm_scope: Literal["anchor", "batch"] = "anchor"

    def __post_init__(self):
        if self.variant not in ("constant", "power", "exponential"):
            raise InvalidParams(f"unknown weighting variant {self.variant!r}")
        for name in ("p", "q", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be >= 0")
        if self.norm_scope not in ("anchor", "batch"):
            raise InvalidParams(f"norm_scope must be 'anchor' or 'batch', got {self.norm_scope!r}")


@dataclass(frozen=True)
class PairWeights:
    """N x N positive / negative weights plus the masks they were computed on."""

    pos: np.ndarray
    neg: np.ndarray
    pos_mask: np.ndarray
    neg_mask: np.ndarray

    def positives(self, i):
        return self.pos[i, self.pos_mask[i]]

    def negatives(self, i):
        return self.neg[i, self.neg_mask[i]]


@dataclass(frozen=True)
class TripletWeights:
    triplets: np.ndarray
    values: np.ndarray


WeightVector = Union[PairWeights, TripletWeights]


def _check_pair_preconditions(d, mined: MinedPairs, m1, m2):
    if np.any(mined.pos & (d < m1)):
        raise PreconditionViolation(f"a mined positive pair lies below m1={m1}")
    if np.any(mined.neg & (d > m2)):
        raise PreconditionViolation(f"a mined negative pair lies above m2={m2}")


def _triplet_args(d, triplets: MinedTriplets, m):
    t = triplets.triplets
    if len(t) == 0:
        return np.zeros(0)
    args = triplet_slack(d, t[:, 0], t[:, 1], t[:, 2], m)
    if np.any(args < 0):
        raise PreconditionViolation("a mined triplet violates D_ij - D_ik + m >= 0")
    return args


def constant_pair_weights(mined: MinedPairs) -> PairWeights:
    return PairWeights(mined.pos.astype(np.float64), mined.neg.astype(np.float64),
                       mined.pos, mined.neg)


def constant_triplet_weights(triplets: MinedTriplets) -> TripletWeights:
    return TripletWeights(triplets.triplets, np.ones(len(triplets)))


def power_pair_weights(d, mined: MinedPairs, p, q, m1, m2) -> PairWeights:
    """w+ = (D - m1)^p, w- = (m2 - D)^q on the mined sets, with 0^0 = 1."""
    _check_pair_preconditions(d, mined, m1, m2)
    wp = np.where(mined.pos, np.power(np.where(mined.pos, d - m1, 1.0), p), 0.0)
    wn = np.where(mined.neg, np.power(np.where(mined.neg, m2 - d, 1.0), q), 0.0)
    return PairWeights(wp, wn, mined.pos, mined.neg)


def power_triplet_weights(d, triplets: MinedTriplets, p, m) -> TripletWeights:
    args = _triplet_args(d, triplets, m)
    return TripletWeights(triplets.triplets, np.power(args, p))


def _group_softmax_numerators(args, groups, n_groups):
    top = np.full(n_groups, -np.inf)
    np.maximum.at(top, groups, args)
    return np.exp(args - top[groups])


def exp_pair_weights(d, mined: MinedPairs, alpha, beta, m1, m2, normalize=False) -> PairWeights:
    """w+ = exp(alpha (D - m1)), w- = exp(beta (m2 - D)).

    Unnormalized exponents are clamped at 50. With ``normalize`` the result is
    a per-anchor softmax computed with max subtraction, so no clamp is needed.
    """
    _check_pair_preconditions(d, mined, m1, m2)
    pa = np.where(mined.pos, alpha * (d - m1), -np.inf)
    na = np.where(mined.neg, beta * (m2 - d), -np.inf)
    if not normalize:
        wp = np.where(mined.pos, np.exp(np.minimum(pa, EXP_CLAMP)), 0.0)
        wn = np.where(mined.neg, np.exp(np.minimum(na, EXP_CLAMP)), 0.0)
        return PairWeights(wp, wn, mined.pos, mined.neg)
    wp = _masked_row_softmax_numerators(pa, mined.pos)
    wn = _masked_row_softmax_numerators(na, mined.neg)
    return normalize_weights(PairWeights(wp, wn, mined.pos, mined.neg))


def _masked_row_softmax_numerators(args, mask):
    top = np.where(mask.any(axis=1), args.max(axis=1), 0.0)
    return np.where(mask, np.exp(args - top[:, None]), 0.0)


def exp_triplet_weights(d, triplets: MinedTriplets, alpha, m, normalize=False,
                        scope="anchor") -> TripletWeights:
    args = alpha * _triplet_args(d, triplets, m)
    if not normalize:
        return TripletWeights(triplets.triplets, np.exp(np.minimum(args, EXP_CLAMP)))
    if len(args) == 0:
        return TripletWeights(triplets.triplets, args)
    if scope == "batch":
        groups, n_groups = np.zeros(len(args), dtype=np.int64), 1
    else:
        groups, n_groups = triplets.triplets[:, 0], int(triplets.triplets[:, 0].max()) + 1
    numer = _group_softmax_numerators(args, groups, n_groups)
    return normalize_weights(TripletWeights(triplets.triplets, numer), scope=scope)


def _safe_divide(values, sums):
    return np.where(sums > 0, values / np.where(sums > 0, sums, 1.0), 0.0)


def normalize_weights(weights: WeightVector, scope: str = "anchor") -> WeightVector:
    """Divide each weight by the sum of its group.

    Groups are the anchor's positives, the anchor's negatives, or the anchor's
    triplets; ``scope="batch"`` pools each kind over the whole batch instead.
    Zero-sum groups stay all zero.
    """
    if isinstance(weights, TripletWeights):
        v = weights.values
        if v.size == 0:
            return weights
        if scope == "batch":
            return TripletWeights(weights.triplets, _safe_divide(v, v.sum()))
        anchors = weights.triplets[:, 0]
        sums = np.bincount(anchors, weights=v)
        return TripletWeights(weights.triplets, _safe_divide(v, sums[anchors]))
    if scope == "batch":
        sp, sn = weights.pos.sum(), weights.neg.sum()
    else:
        sp = weights.pos.sum(axis=1, keepdims=True)
        sn = weights.neg.sum(axis=1, keepdims=True)
    return PairWeights(_safe_divide(weights.pos, sp), _safe_divide(weights.neg, sn),
                       weights.pos_mask, weights.neg_mask)


def pair_weights(scheme: WeightScheme, d, mined: MinedPairs, m1, m2) -> PairWeights:
    if scheme.variant == "exponential":
        if scheme.normalize and scheme.norm_scope == "anchor":
            return exp_pair_weights(d, mined, scheme.alpha, scheme.beta, m1, m2, normalize=True)
        w = exp_pair_weights(d, mined, scheme.alpha, scheme.beta, m1, m2)
    elif scheme.variant == "power":
        w = power_pair_weights(d, mined, scheme.p, scheme.q, m1, m2)
    else:
        _check_pair_preconditions(d, mined, m1, m2)
        w = constant_pair_weights(mined)
    return normalize_weights(w, scheme.norm_scope) if scheme.normalize else w


def triplet_weights(scheme: WeightScheme, d, triplets: MinedTriplets, m) -> TripletWeights:
    """Triplet weights use ``p`` (power) or ``alpha`` (exponential)."""
    if scheme.variant == "exponential":
        return exp_triplet_weights(d, triplets, scheme.alpha, m, normalize=scheme.normalize,
                                   scope=scheme.norm_scope)
    if scheme.variant == "power":
        w = power_triplet_weights(d, triplets, scheme.p, m)
    else:
        _triplet_args(d, triplets, m)
        w = constant_triplet_weights(triplets)
    return normalize_weights(w, scheme.norm_scope) if scheme.normalize else w


def emit_weight_curves(scheme: WeightScheme, m1, m2, grid):
    """Unnormalized (D, w+, w-) over a distance grid.

    Power bases are hinged at zero so the curves stay real outside the mined
    range; exponential curves are evaluated as written (with the clamp).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if np.any((grid < 0) | (grid > 2)):
        raise InvalidParams("grid distances must lie in [0, 2]")
    if scheme.variant == "power":
        wp = np.power(np.maximum(grid - m1, 0.0), scheme.p)
        wn = np.power(np.maximum(m2 - grid, 0.0), scheme.q)
    elif scheme.variant == "exponential":
        wp = np.exp(np.minimum(scheme.alpha * (grid - m1), EXP_CLAMP))
        wn = np.exp(np.minimum(scheme.beta * (m2 - grid), EXP_CLAMP))
    else:
        wp = np.ones_like(grid)
        wn = np.ones_like(grid)
    return np.column_stack([grid, wp, wn])


def weight_curves_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["distance", "w_pos", "w_neg"])
    for row in table:
        writer.writerow([f"{v:.6f}" for v in row])
    return buf.getvalue()
