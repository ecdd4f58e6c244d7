"""Zero-shot retrieval evaluation (leave-one-out Recall@K) and class-disjoint splits."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import Dataset
from .errors import InvalidParams, TooFewClasses


@dataclass(frozen=True)
class RetrievalReport:
    recall_at: dict
    num_queries: int
    ks: tuple
    num_excluded: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "recall_at": {str(k): round(float(v), 4) for k, v in self.recall_at.items()},
            "num_queries": self.num_queries,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"


def recall_at_k(embeddings, labels, ks=(1, 2, 4, 8)) -> RetrievalReport:
    """Fraction of queries with a same-class item among their K nearest neighbours.

    Each point queries the other N - 1 (Euclidean distance, ties to the lower
    index). Queries whose class has no other member are excluded and counted
    in ``num_excluded``.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = emb.shape[0]
    ks = tuple(int(k) for k in ks)
    if not ks or min(ks) < 1:
        raise InvalidParams("K values must be positive")
    if max(ks) > n - 1:
        raise InvalidParams(f"K={max(ks)} exceeds the gallery size limit N-1={n - 1}")
    d = kernels.pairwise_distances(emb)
    ranks = kernels.first_hit_rank(d, labels)
    valid = ranks >= 0
    nq = int(valid.sum())
    recalls = {k: (float(np.count_nonzero(ranks[valid] < k)) / nq if nq else 0.0) for k in ks}
    return RetrievalReport(recalls, nq, ks, num_excluded=int(n - nq))


def zero_shot_split(dataset: Dataset, train_class_fraction=2 / 3, seed=0):
    """Split classes (not samples) into disjoint train and test sets."""
    classes = dataset.classes
    if classes.size < 2:
        raise TooFewClasses("a zero-shot split needs at least two classes")
    n_train = int(round(classes.size * train_class_fraction))
    if not 1 <= n_train <= classes.size - 1:
        raise TooFewClasses(
            f"fraction {train_class_fraction} leaves an empty side for {classes.size} classes")
    perm = np.random.default_rng(seed).permutation(classes)
    train_classes = np.sort(perm[:n_train])
    in_train = np.isin(dataset.labels, train_classes)
    return dataset.subset(np.flatnonzero(in_train)), dataset.subset(np.flatnonzero(~in_train))
