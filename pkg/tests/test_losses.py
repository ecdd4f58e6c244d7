import math

import numpy as np
import pytest

from pairweight.errors import InvalidParams, InvalidTemperature, StructureViolation, WeightMiningMismatch
from pairweight.geometry import pair_mask, pairwise_distances
from pairweight.losses import (
    LossConfig,
    contrastive_loss,
    general_pair_loss,
    general_triplet_loss,
    lifted_structured_loss,
    multi_similarity_loss,
    npair_loss,
    npair_pairs,
    square_contrastive_loss,
    square_pair_loss,
    square_triplet_loss,
    triplet_loss,
)
from pairweight.mining import (
    MinedPairs,
    MinedTriplets,
    all_triplets,
    mine_ms,
    mine_thresholds,
    mine_triplet_margin,
)
from pairweight.model import finite_diff_gradient
from pairweight.weighting import WeightScheme, constant_pair_weights, pair_weights, triplet_weights

from conftest import pk_labels, random_unit
import oracles


def single_anchor(d_pos, d_neg):
    d = np.array([[0.0, d_pos, d_neg], [d_pos, 0.0, 1.9], [d_neg, 1.9, 0.0]])
    pos = np.zeros((3, 3), bool)
    neg = np.zeros((3, 3), bool)
    pos[0, 1] = neg[0, 2] = True
    return d, MinedPairs(pos, neg)


def batch(rng, P=3, K=3, dim=4):
    labels = pk_labels(P, K)
    return pairwise_distances(random_unit(rng, P * K, dim)), labels


def sets(mined):
    return mined.as_sets()


# ----------------------------------------------------------- scalar examples

def test_general_pair_example_and_empty():
    d, mined = single_anchor(0.6, 0.5)
    res = general_pair_loss(d, mined, constant_pair_weights(mined), 0.0, 0.8, n_anchors=1)
    assert res.value == pytest.approx(0.9)
    assert res.grad[0, 1] == 1.0 and res.grad[0, 2] == -1.0
    empty = MinedPairs(np.zeros((3, 3), bool), np.zeros((3, 3), bool))
    res = general_pair_loss(d, empty, constant_pair_weights(empty), 0.0, 0.8)
    assert res.value == 0.0 and not res.grad.any()


def test_general_pair_mismatch():
    d, mined = single_anchor(0.6, 0.5)
    other = MinedPairs(mined.pos, np.zeros_like(mined.neg))
    with pytest.raises(WeightMiningMismatch):
        general_pair_loss(d, mined, constant_pair_weights(other), 0.0, 0.8)


def test_general_triplet_examples():
    d = np.array([[0.0, 0.6, 0.5], [0.6, 0.0, 1.9], [0.5, 1.9, 0.0]])
    t = MinedTriplets(np.array([[0, 1, 2]], dtype=np.int64))
    w = triplet_weights(WeightScheme("constant", normalize=False), d, t, 0.1)
    res = general_triplet_loss(d, t, w, 0.1, n_anchors=1)
    assert res.value == pytest.approx(0.2)
    assert res.grad[0, 1] == 1.0 and res.grad[0, 2] == -1.0
    d2 = np.array([[0.0, 0.2, 0.9], [0.2, 0.0, 1.9], [0.9, 1.9, 0.0]])
    assert triplet_loss(d2, t, 0.1).value == 0.0
    with pytest.raises(WeightMiningMismatch):
        general_triplet_loss(d, MinedTriplets(np.zeros((0, 3), dtype=np.int64)), w, 0.1)


def test_contrastive_example():
    labels = [0, 0, 1]
    d = np.array([[0.0, 0.3, 0.9], [0.3, 0.0, 1.9], [0.9, 1.9, 0.0]])
    res = contrastive_loss(d, pair_mask(labels), 0.8, n_anchors=1)
    # both anchors 0 and 1 see the positive at 0.3; every negative is beyond 0.8
    assert res.value == pytest.approx(0.6)
    with pytest.raises(InvalidParams):
        contrastive_loss(d, pair_mask(labels), -0.1)


def test_triplet_loss_examples():
    t = MinedTriplets(np.array([[0, 1, 2]], dtype=np.int64))
    mk = lambda a, b: np.array([[0.0, a, b], [a, 0.0, 1.9], [b, 1.9, 0.0]])
    assert triplet_loss(mk(0.2, 0.4), t, 0.1, n_anchors=1).value == 0.0
    assert triplet_loss(mk(0.4, 0.2), t, 0.1, n_anchors=1).value == pytest.approx(0.3)
    assert triplet_loss(mk(0.5, 0.5), t, 0.0, n_anchors=1).value == 0.0


def test_npair_examples():
    labels = [0, 0, 1, 1]
    d = np.full((4, 4), 1.0)
    np.fill_diagonal(d, 0.0)
    # anchor 0 / positive 1; its single negative is sample 3 (the other class's positive)
    d[0, 1] = d[0, 3] = 0.7
    d[2, 3] = d[2, 1] = 0.7
    assert npair_loss(d, labels).value == pytest.approx(math.log(2))
    d[0, 1] = d[2, 3] = 0.0
    d[0, 3] = d[2, 1] = 40.0
    assert npair_loss(d, labels).value < 1e-15
    with pytest.raises(StructureViolation):
        npair_pairs([0, 0, 0, 1, 1, 1])
    with pytest.raises(StructureViolation):
        npair_pairs([0, 0])


def test_lifted_examples():
    labels = [0, 0, 1]
    m = 0.5
    d = np.array([[0.0, 0.0, m], [0.0, 0.0, m], [m, m, 0.0]])
    assert lifted_structured_loss(d, pair_mask(labels), m).value == 0.0
    far = np.array([[0.0, 0.3, 1e4], [0.3, 0.0, 1e4], [1e4, 1e4, 0.0]])
    assert lifted_structured_loss(far, pair_mask(labels), m).value == 0.0
    no_neg = pair_mask([0, 0, 0])
    assert lifted_structured_loss(far, no_neg, m).value == 0.0


def test_ms_examples():
    d, mined = single_anchor(1.0, 1.9)
    mined = MinedPairs(mined.pos, np.zeros_like(mined.neg))
    v1 = multi_similarity_loss(d, mined, 2.0, 50.0, 1.0, plus_one=True, n_anchors=1)
    v2 = multi_similarity_loss(d, mined, 2.0, 50.0, 1.0, plus_one=False, n_anchors=1)
    assert v1.value == pytest.approx(0.5 * math.log(2))
    assert v2.value == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidTemperature):
        multi_similarity_loss(d, mined, 0.0, 1.0, 1.0)


def test_square_examples():
    d, mined = single_anchor(0.5, 0.0)
    pos_only = MinedPairs(mined.pos, np.zeros_like(mined.neg))
    res = square_pair_loss(d, pos_only, 0.0, 0.8, n_anchors=1)
    assert res.value == pytest.approx(0.25) and res.grad[0, 1] == pytest.approx(1.0)
    neg_only = MinedPairs(np.zeros_like(mined.pos), mined.neg)
    res = square_pair_loss(d, neg_only, 0.0, 0.8, n_anchors=1)
    assert res.value == pytest.approx(0.8) and res.grad[0, 2] == 0.0
    labels = [0, 0, 1]
    d = np.array([[0.0, 0.6, 1.9], [0.6, 0.0, 1.9], [1.9, 1.9, 0.0]])
    assert square_contrastive_loss(d, pair_mask(labels), 0.0, 0.8, n_anchors=2).value == \
        pytest.approx(0.36)
    t = MinedTriplets(np.array([[0, 1, 2]], dtype=np.int64))
    d = np.array([[0.0, 0.6, 0.5], [0.6, 0.0, 1.9], [0.5, 1.9, 0.0]])
    assert square_triplet_loss(d, t, 0.1, n_anchors=1).value == pytest.approx(0.21)
    d = np.array([[0.0, 0.1, 0.9], [0.1, 0.0, 1.9], [0.9, 1.9, 0.0]])
    assert square_triplet_loss(d, t, 0.1, n_anchors=1).value == 0.0


def test_square_contrastive_inactive_pairs():
    labels = [0, 0, 1]
    d = np.array([[0.0, 0.6, 1.9], [0.6, 0.0, 1.9], [1.9, 1.9, 0.0]])
    res = square_contrastive_loss(d, pair_mask(labels), 0.0, 0.8)
    assert res.grad[0, 2] == 0.0 and res.grad[2, 0] == 0.0


def test_loss_config_validation():
    with pytest.raises(InvalidParams):
        LossConfig(m1=0.5, m2=0.4)
    with pytest.raises(InvalidParams):
        LossConfig(m=-1)
    with pytest.raises(InvalidParams):
        LossConfig(epsilon=-1)


# -------------------------------------------------------- oracle agreement

def _check(res, ref, tol=1e-10):
    value, grad = ref
    assert res.value == pytest.approx(value, abs=tol)
    np.testing.assert_allclose(res.grad, grad, atol=tol)


def test_losses_match_brute_force(rng):
    for trial in range(25):
        P = int(rng.integers(2, 5))
        d, labels = batch(rng, P=P, K=3)
        mask = pair_mask(labels)
        dl, ll = d.tolist(), labels.tolist()

        mined = mine_thresholds(d, mask, 0.0, 0.9)
        for scheme in (WeightScheme("power", p=1.5, q=2), WeightScheme("exponential", alpha=1, beta=3),
                       WeightScheme("constant", normalize=False)):
            w = pair_weights(scheme, d, mined, 0.0, 0.9)
            _check(general_pair_loss(d, mined, w, 0.0, 0.9),
                   oracles.general_pair(dl, sets(mined), w.pos.tolist(), w.neg.tolist(), 0.0, 0.9))

        trip = mine_triplet_margin(d, mask, 0.2)
        tw = triplet_weights(WeightScheme("exponential", alpha=2), d, trip, 0.2)
        _check(general_triplet_loss(d, trip, tw, 0.2),
               oracles.general_triplet(dl, trip.triplets.tolist(), tw.values.tolist(), 0.2))
        _check(triplet_loss(d, trip, 0.2),
               oracles.general_triplet(dl, trip.triplets.tolist(), [1.0] * len(trip), 0.2))
        _check(contrastive_loss(d, mask, 0.8), oracles.contrastive(dl, ll, 0.8))
        _check(lifted_structured_loss(d, mask, 0.5), oracles.lifted(dl, ll, 0.5))
        ms = mine_ms(d, mask, 0.1)
        for plus_one in (True, False):
            _check(multi_similarity_loss(d, ms, 2.0, 10.0, 0.6, plus_one=plus_one),
                   oracles.multi_similarity(dl, sets(ms), 2.0, 10.0, 0.6, plus_one))
        full = MinedPairs(mask.positive, mask.negative)
        _check(square_pair_loss(d, full, 0.1, 0.8), oracles.square_pair(dl, sets(full), 0.1, 0.8))
        _check(square_contrastive_loss(d, mask, 0.1, 0.8),
               oracles.square_contrastive(dl, ll, 0.1, 0.8))
        every = all_triplets(mask)
        _check(square_triplet_loss(d, every, 0.1),
               oracles.square_triplet(dl, every.triplets.tolist(), 0.1))

        d2, l2 = batch(rng, P=P, K=2)
        _check(npair_loss(d2, l2), oracles.npair(d2.tolist(), l2.tolist()))


def test_npair_order_follows_first_appearance():
    labels = np.array([1, 0, 1, 0])
    assert npair_pairs(labels).tolist() == [[0, 2], [1, 3]]


# ------------------------------------------------ finite differences over D

def _fd_matches(fn, d, grad, tol=1e-6):
    """|analytic - numeric| <= tol * max(1, |analytic|) entrywise."""
    numeric = finite_diff_gradient(fn, d.copy())
    err = np.max(np.abs(grad - numeric) / np.maximum(1.0, np.abs(grad)))
    assert err < tol, err


def test_smooth_losses_match_finite_differences(rng):
    for _ in range(5):
        d, labels = batch(rng, P=3, K=2)
        _fd_matches(lambda x: npair_loss(x, labels).value, d, npair_loss(d, labels).grad)
        d, labels = batch(rng, P=3, K=3)
        mask = pair_mask(labels)
        ms = mine_ms(d, mask, 0.1)
        for plus_one in (True, False):
            f = lambda x: multi_similarity_loss(x, ms, 2.0, 10.0, 0.6, plus_one=plus_one).value
            _fd_matches(f, d, multi_similarity_loss(d, ms, 2.0, 10.0, 0.6, plus_one=plus_one).grad)


def test_lifted_matches_finite_differences(rng):
    done = 0
    while done < 5:
        d, labels = batch(rng, P=2, K=3)
        mask = pair_mask(labels)
        res = lifted_structured_loss(d, mask, 0.5)
        # stay away from the outer hinge kink
        lse = np.log(np.where(mask.negative, np.exp(0.5 - d), 0.0).sum(axis=1))
        arg = d + lse[:, None] + lse[None, :]
        if np.min(np.abs(arg[mask.positive])) < 1e-3:
            continue
        _fd_matches(lambda x: lifted_structured_loss(x, mask, 0.5).value, d, res.grad)
        done += 1


def test_square_losses_match_finite_differences(rng):
    d, labels = batch(rng, P=3, K=3)
    mask = pair_mask(labels)
    full = MinedPairs(mask.positive, mask.negative)
    _fd_matches(lambda x: square_pair_loss(x, full, 0.0, 0.8).value, d,
                square_pair_loss(d, full, 0.0, 0.8).grad)
    _fd_matches(lambda x: square_contrastive_loss(x, mask, 0.0, 0.8).value, d,
                square_contrastive_loss(d, mask, 0.0, 0.8).grad)
    every = all_triplets(mask)
    _fd_matches(lambda x: square_triplet_loss(x, every, 0.1).value, d,
                square_triplet_loss(d, every, 0.1).grad)


def test_values_nonnegative(rng):
    for _ in range(20):
        d, labels = batch(rng)
        mask = pair_mask(labels)
        ms = mine_ms(d, mask, 0.1)
        assert contrastive_loss(d, mask, 0.8).value >= 0
        assert lifted_structured_loss(d, mask, 0.5).value >= 0
        assert multi_similarity_loss(d, ms, 2, 50, 1.0, plus_one=True).value >= 0
        assert square_contrastive_loss(d, mask, 0.0, 0.8).value >= 0
        assert triplet_loss(d, mine_triplet_margin(d, mask, 0.1), 0.1).value >= 0


def test_ms_v2_can_be_negative():
    """Without the leading 1, a lone positive below the margin gives (D - m) < 0."""
    d, mined = single_anchor(0.5, 1.9)
    mined = MinedPairs(mined.pos, np.zeros_like(mined.neg))
    res = multi_similarity_loss(d, mined, 2.0, 50.0, 1.0, plus_one=False, n_anchors=1)
    assert res.value == pytest.approx(-0.5)


def test_gradient_zero_outside_mined(rng):
    d, labels = batch(rng)
    mask = pair_mask(labels)
    mined = mine_thresholds(d, mask, 0.0, 0.7)
    w = pair_weights(WeightScheme("exponential", alpha=1, beta=2), d, mined, 0.0, 0.7)
    res = general_pair_loss(d, mined, w, 0.0, 0.7)
    assert not res.grad[~(mined.pos | mined.neg)].any()
    ms = mine_ms(d, mask, 0.05)
    res = multi_similarity_loss(d, ms, 2, 50, 1.0)
    assert not res.grad[~(ms.pos | ms.neg)].any()
