"""Batch objective: mining, weighting and loss for one configured loss mode.

A :class:`Plan` freezes everything discrete or detached about a batch (the
mined sets and the weights) so the same plan can be re-evaluated at perturbed
distances, which is what the finite-difference checks need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import losses as L
from .errors import ConfigError
from .geometry import PairMask, pair_mask
from .mining import (
    MinedPairs,
    MinedTriplets,
    all_triplets,
    mine_hardest_triplets,
    mine_ms,
    mine_thresholds,
    mine_triplet_margin,
    triplet_slack,
)
from .weighting import WeightScheme, pair_weights, triplet_weights

LOSS_MODES = (
    "pair", "triplet", "contrastive", "classic-triplet", "npair", "lifted", "ms",
    "square-pair", "square-contrastive", "square-triplet",
)
MINING_MODES = ("thresholds", "triplet_margin", "hardest", "ms")

_ALLOWED_MINING = {
    "pair": ("thresholds", "ms"),
    "triplet": ("triplet_margin", "hardest"),
    "classic-triplet": ("triplet_margin", "hardest"),
    "ms": ("ms",),
}


@dataclass(frozen=True)
class Objective:
    loss_mode: str = "pair"
    mining: str = "thresholds"
    scheme: WeightScheme = field(default_factory=WeightScheme)
    loss: L.LossConfig = field(default_factory=L.LossConfig)

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"unknown loss mode {self.loss_mode!r}; expected one of {LOSS_MODES}",
                              field="loss_mode")
        if self.mining not in MINING_MODES:
            raise ConfigError(f"unknown mining {self.mining!r}", field="mining")
        allowed = _ALLOWED_MINING.get(self.loss_mode)
        if allowed and self.mining not in allowed:
            raise ConfigError(f"loss mode {self.loss_mode!r} supports mining {allowed}",
                              field="mining")
        if self.loss_mode == "ms" and (self.scheme.alpha <= 0 or self.scheme.beta <= 0):
            raise ConfigError("ms loss needs alpha > 0 and beta > 0", field="scheme")


@dataclass(frozen=True)
class Plan:
    mask: PairMask
    labels: np.ndarray
    mined: Optional[MinedPairs] = None
    triplets: Optional[MinedTriplets] = None
    weights: object = None


def _hardest_active(d, mask, m):
    hard = mine_hardest_triplets(d, mask)
    t = hard.triplets
    if len(t) == 0:
        return hard
    keep = triplet_slack(d, t[:, 0], t[:, 1], t[:, 2], m) >= 0.0
    return MinedTriplets(t[keep], hard.skipped)


def make_plan(obj: Objective, d, labels) -> Plan:
    """Mine and weigh one batch; the loss itself is left to :func:`evaluate`."""
    labels = np.asarray(labels)
    mask = pair_mask(labels)
    cfg = obj.loss
    mode = obj.loss_mode
    if mode == "pair":
        mined = mine_thresholds(d, mask, cfg.m1, cfg.m2)
        if obj.mining == "ms":
            mined = mined.intersect(mine_ms(d, mask, cfg.epsilon))
        return Plan(mask, labels, mined=mined,
                    weights=pair_weights(obj.scheme, d, mined, cfg.m1, cfg.m2))
    if mode == "triplet":
        trip = (_hardest_active(d, mask, cfg.m) if obj.mining == "hardest"
                else mine_triplet_margin(d, mask, cfg.m))
        return Plan(mask, labels, triplets=trip, weights=triplet_weights(obj.scheme, d, trip, cfg.m))
    if mode == "classic-triplet":
        trip = (mine_hardest_triplets(d, mask) if obj.mining == "hardest"
                else mine_triplet_margin(d, mask, cfg.m))
        return Plan(mask, labels, triplets=trip)
    if mode == "square-triplet":
        trip = mine_hardest_triplets(d, mask) if obj.mining == "hardest" else all_triplets(mask)
        return Plan(mask, labels, triplets=trip)
    if mode == "ms":
        return Plan(mask, labels, mined=mine_ms(d, mask, cfg.epsilon))
    if mode == "square-pair":
        return Plan(mask, labels, mined=MinedPairs(mask.positive, mask.negative))
    if mode == "npair":
        L.npair_pairs(labels)
    return Plan(mask, labels)


def evaluate(obj: Objective, d, plan: Plan) -> L.LossResult:
    cfg = obj.loss
    mode = obj.loss_mode
    if mode == "pair":
        return L.general_pair_loss(d, plan.mined, plan.weights, cfg.m1, cfg.m2)
    if mode == "triplet":
        return L.general_triplet_loss(d, plan.triplets, plan.weights, cfg.m)
    if mode == "classic-triplet":
        return L.triplet_loss(d, plan.triplets, cfg.m)
    if mode == "contrastive":
        return L.contrastive_loss(d, plan.mask, cfg.m)
    if mode == "npair":
        return L.npair_loss(d, plan.labels)
    if mode == "lifted":
        return L.lifted_structured_loss(d, plan.mask, cfg.m)
    if mode == "ms":
        return L.multi_similarity_loss(d, plan.mined, obj.scheme.alpha, obj.scheme.beta, cfg.m,
                                       plus_one=cfg.ms_plus_one)
    if mode == "square-pair":
        return L.square_pair_loss(d, plan.mined, cfg.m1, cfg.m2)
    if mode == "square-contrastive":
        return L.square_contrastive_loss(d, plan.mask, cfg.m1, cfg.m2)
    return L.square_triplet_loss(d, plan.triplets, cfg.m)


def batch_loss(obj: Objective, d, labels):
    plan = make_plan(obj, d, labels)
    return evaluate(obj, d, plan), plan


def hinge_arguments(obj: Objective, d, plan: Plan) -> np.ndarray:
    """Arguments of every hinge [.]_+ the loss evaluates on this plan.

    The loss is non-differentiable where one of these is zero; gradient
    checks use this to stay clear of such points.
    """
    cfg = obj.loss
    mode = obj.loss_mode
    pos, neg = plan.mask.positive, plan.mask.negative
    if mode == "pair":
        parts = [d[plan.mined.pos] - cfg.m1, cfg.m2 - d[plan.mined.neg]]
    elif mode == "contrastive":
        parts = [cfg.m - d[neg]]
    elif mode == "square-contrastive":
        parts = [d[pos] - cfg.m1, cfg.m2 - d[neg]]
    elif mode == "square-pair":
        parts = [d[pos] ** 2 - cfg.m1, cfg.m2 - d[neg] ** 2]
    elif mode in ("triplet", "classic-triplet", "square-triplet"):
        t = plan.triplets.triplets
        dd = d * d if mode == "square-triplet" else d
        parts = [triplet_slack(dd, t[:, 0], t[:, 1], t[:, 2], cfg.m)] if len(t) else []
    elif mode == "lifted":
        e = np.where(neg, np.exp(cfg.m - d), 0.0).sum(axis=1)
        with np.errstate(divide="ignore"):
            lse = np.log(e)
        arg = d + lse[:, None] + lse[None, :]
        parts = [arg[pos & np.isfinite(arg)]]
    else:
        parts = []
    return np.concatenate(parts) if parts else np.zeros(0)
