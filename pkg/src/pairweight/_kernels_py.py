"""Pure numpy implementations of the hot kernels.

Semantics must match ``_kernels_c.pyx`` exactly; results agree to rounding
(summation order differs).
"""
import numpy as np

EPS_D = 1e-12
_CHUNK = 256


def pairwise_distances(z):
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, _CHUNK):
        diff = z[start:start + _CHUNK, None, :] - z[None, :, :]
        out[start:start + _CHUNK] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)
    return out


def distance_backward(grad_d, z, d):
    grad_d = np.asarray(grad_d, dtype=np.float64)
    safe = np.where(d < EPS_D, 1.0, d)
    coef = np.where(d < EPS_D, 0.0, grad_d / safe)
    coef = coef + coef.T
    return z * coef.sum(axis=1)[:, None] - coef @ z


def weighted_pair_loss(d, pos_sel, neg_sel, w_pos, w_neg, m1, m2, n_anchors):
    pos_arg = d - m1
    neg_arg = m2 - d
    pos_act = pos_sel & (pos_arg >= 0.0)
    neg_act = neg_sel & (neg_arg >= 0.0)
    per_anchor = (np.where(pos_act, w_pos * pos_arg, 0.0).sum(axis=1)
                  + np.where(neg_act, w_neg * neg_arg, 0.0).sum(axis=1))
    grad = np.where(pos_act, w_pos, 0.0) - np.where(neg_act, w_neg, 0.0)
    if n_anchors == 0:
        return 0.0, np.zeros_like(d)
    return float(per_anchor.sum() / n_anchors), grad / n_anchors


def weighted_triplet_loss(d, triplets, weights, margin, n_anchors):
    n = d.shape[0]
    grad = np.zeros((n, n))
    if len(triplets) == 0 or n_anchors == 0:
        return 0.0, grad
    i, j, k = triplets[:, 0], triplets[:, 1], triplets[:, 2]
    arg = d[i, j] - d[i, k] + margin
    act = arg >= 0.0
    contrib = np.where(act, weights * arg, 0.0)
    per_anchor = np.bincount(i, weights=contrib, minlength=n)
    w = np.where(act, weights, 0.0) / n_anchors
    np.add.at(grad, (i, j), w)
    np.add.at(grad, (i, k), -w)
    return float(per_anchor.sum() / n_anchors), grad


def first_hit_rank(d, labels):
    """Zero-based rank of the first same-label neighbour per query, -1 if none.

    Ranking is by distance with ties broken by lower index; the query itself
    is excluded from its gallery.
    """
    n = d.shape[0]
    labels = np.asarray(labels)
    dm = np.array(d, dtype=np.float64, copy=True)
    np.fill_diagonal(dm, np.inf)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    has = same.any(axis=1)
    dsame = np.where(same, dm, np.inf)
    dstar = dsame.min(axis=1)
    jstar = np.argmax(same & (dsame == dstar[:, None]), axis=1)
    idx = np.arange(n)
    closer = (dm < dstar[:, None]).sum(axis=1)
    tied = ((dm == dstar[:, None]) & (idx[None, :] < jstar[:, None])).sum(axis=1)
    return np.where(has, closer + tied, -1).astype(np.int64)
