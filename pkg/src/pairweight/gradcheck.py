"""End-to-end gradient verification against central finite differences.

For each loss variant a random batch is pushed through embedder ->
normalization -> distances -> loss. The analytic parameter gradients
(with mined sets and weights held fixed, as in training) are compared with
central differences of the same frozen-plan objective.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import l2_normalize, pairwise_distances
from .losses import LossConfig
from .model import MlpEmbedder, finite_diff_gradient
from .objective import Objective, evaluate, hinge_arguments, make_plan
from .trainer import compute_gradients
from .weighting import WeightScheme

TOLERANCE = 1e-4
FD_STEP = 1e-5
SKIP_BELOW = 1e-8
KINK_MARGIN = 1e-4
DIST_MARGIN = 1e-3


def _pair(variant, normalize, **kw):
    return Objective("pair", "thresholds", WeightScheme(variant, normalize=normalize, **kw),
                     LossConfig(m1=0.0, m2=0.8))


def _triplet(variant, normalize, **kw):
    return Objective("triplet", "triplet_margin", WeightScheme(variant, normalize=normalize, **kw),
                     LossConfig(m=0.1))


VARIANTS = {
    "pair-P": _pair("power", False, p=0.0, q=1.0),
    "pair-P-norm": _pair("power", True, p=0.0, q=1.0),
    "pair-E": _pair("exponential", False, alpha=0.0, beta=2.0),
    "pair-E-norm": _pair("exponential", True, alpha=0.0, beta=2.0),
    "triplet-P": _triplet("power", False, p=5.0),
    "triplet-P-norm": _triplet("power", True, p=5.0),
    "triplet-E": _triplet("exponential", False, alpha=2.0),
    "triplet-E-norm": _triplet("exponential", True, alpha=40.0),
    "contrastive": Objective("contrastive", loss=LossConfig(m=0.8)),
    "triplet": Objective("classic-triplet", "triplet_margin", loss=LossConfig(m=0.1)),
    "npair": Objective("npair"),
    "lifted": Objective("lifted", loss=LossConfig(m=0.5)),
    "ms-v1": Objective("ms", "ms", WeightScheme("exponential", alpha=2.0, beta=50.0),
                       LossConfig(m=1.0, epsilon=0.1, ms_plus_one=True)),
    "ms-v2": Objective("ms", "ms", WeightScheme("exponential", alpha=2.0, beta=50.0),
                       LossConfig(m=1.0, epsilon=0.1, ms_plus_one=False)),
    "square-pair": Objective("square-pair", loss=LossConfig(m1=0.0, m2=0.8)),
    "square-contrastive": Objective("square-contrastive", loss=LossConfig(m1=0.0, m2=0.8)),
    "square-triplet": Objective("square-triplet", loss=LossConfig(m=0.1)),
}


@dataclass(frozen=True)
class CheckResult:
    variant: str
    fusion: bool
    trial: int
    max_rel_err: float
    loss: float

    @property
    def ok(self):
        return self.max_rel_err < TOLERANCE


def max_relative_error(analytic, numeric, floor=SKIP_BELOW):
    """Largest |a - n| / max(|a|, |n|) over coordinates where either exceeds ``floor``."""
    worst = 0.0
    for k in analytic:
        a, n = np.ravel(analytic[k]), np.ravel(numeric[k])
        scale = np.maximum(np.abs(a), np.abs(n))
        keep = scale >= floor
        if keep.any():
            worst = max(worst, float(np.max(np.abs(a - n)[keep] / scale[keep])))
    return worst


def _batch(rng, objective, P, K, d_in):
    k = 2 if objective.loss_mode == "npair" else K
    labels = np.repeat(np.arange(P), k)
    return rng.normal(size=(P * k, d_in)), labels


def _near_kink(model, x, labels, objective):
    """True if the batch sits near a ReLU kink, a loss hinge, or the D = 0 cusp."""
    raw, cache = model.forward(x)
    if any(np.min(np.abs(z)) < KINK_MARGIN for z in cache.pre):
        return True
    norms = np.linalg.norm(raw, axis=1)
    if np.min(norms) < DIST_MARGIN:
        return True
    d = pairwise_distances(raw / norms[:, None])
    if np.min(d[~np.eye(len(d), dtype=bool)]) < DIST_MARGIN:
        return True
    args = hinge_arguments(objective, d, make_plan(objective, d, labels))
    return args.size > 0 and np.min(np.abs(args)) < DIST_MARGIN


def check_variant(name, objective=None, *, fusion=False, trial=0, P=4, K=3, d_in=6,
                  hidden=(8, 8), embed_dim=8, corrupt=False) -> CheckResult:
    objective = objective or VARIANTS[name]
    seed = 1000 * trial + (1 if fusion else 0)
    rng = np.random.default_rng(seed)
    heads = len(hidden) if fusion else 1
    model = MlpEmbedder(d_in, hidden, embed_dim // heads, fusion=fusion, seed=seed)
    for _ in range(50):
        x, labels = _batch(rng, objective, P, K, d_in)
        if not _near_kink(model, x, labels, objective):
            break
    analytic = compute_gradients(model, x, labels, objective).grads
    if corrupt:
        first = next(iter(analytic))
        analytic = dict(analytic)
        analytic[first] = analytic[first] * 1.01 + 1e-3

    raw0, _ = model.forward(x)
    d0 = pairwise_distances(l2_normalize(raw0)[0])
    plan = make_plan(objective, d0, labels)
    base_loss = evaluate(objective, d0, plan).value

    def frozen_loss(params):
        model.params = params
        raw, _ = model.forward(x)
        return evaluate(objective, pairwise_distances(l2_normalize(raw)[0]), plan).value

    saved = model.params
    numeric = finite_diff_gradient(frozen_loss, saved, FD_STEP)
    model.params = saved
    return CheckResult(name, fusion, trial, max_relative_error(analytic, numeric), base_loss)


def run_suite(variants=None, trials=20, fusions=(False, True), corrupt=False):
    """Check every (variant, fusion, trial); returns (results, seconds)."""
    t0 = time.perf_counter()
    results = []
    for name in variants or list(VARIANTS):
        if name not in VARIANTS:
            raise KeyError(f"unknown variant {name!r}; known: {', '.join(VARIANTS)}")
        for fusion in fusions:
            for trial in range(trials):
                results.append(check_variant(name, fusion=fusion, trial=trial, corrupt=corrupt))
    return results, time.perf_counter() - t0


def summarize(results):
    """Worst error per variant: {variant: (max_rel_err, all_ok)}."""
    table = {}
    for r in results:
        err, ok = table.get(r.variant, (0.0, True))
        table[r.variant] = (max(err, r.max_rel_err), ok and r.ok)
    return table
