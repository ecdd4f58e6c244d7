"""Datasets: synthetic Gaussian clusters and label-first CSV files."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParams, ParseError, RaggedRows


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise InvalidParams(
                f"features {self.features.shape} and labels {self.labels.shape} disagree")

    def __len__(self):
        return self.labels.size

    @property
    def classes(self):
        return np.unique(self.labels)

    @property
    def class_index(self):
        """label -> row indices, in row order."""
        return {int(c): np.flatnonzero(self.labels == c) for c in self.classes}

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows])


def gen_synthetic_clusters(num_classes, per_class, input_dim, center_scale=1.0, noise_sigma=0.5,
                           seed=0, intrinsic_dim=None) -> Dataset:
    """Isotropic Gaussian blobs around centres drawn uniformly in [-scale, scale]^d.

    With ``intrinsic_dim = k`` the centres are drawn in [-scale, scale]^k and
    placed in a random k-dimensional subspace, while the noise still fills all
    ``input_dim`` directions. Classes then share structure an embedder can
    learn (suppress the nuisance directions) and carry over to unseen classes.
    """
    if num_classes < 2 or per_class < 2 or input_dim < 1:
        raise InvalidParams("need num_classes >= 2, per_class >= 2 and input_dim >= 1")
    if noise_sigma < 0 or center_scale < 0:
        raise InvalidParams("noise_sigma and center_scale must be non-negative")
    if intrinsic_dim is not None and not 1 <= intrinsic_dim <= input_dim:
        raise InvalidParams(f"intrinsic_dim must lie in [1, {input_dim}], got {intrinsic_dim}")
    rng = np.random.default_rng(seed)
    if intrinsic_dim is None:
        centers = rng.uniform(-center_scale, center_scale, size=(num_classes, input_dim))
    else:
        basis = np.linalg.qr(rng.normal(size=(input_dim, intrinsic_dim)))[0]
        centers = rng.uniform(-center_scale, center_scale, size=(num_classes, intrinsic_dim)) @ basis.T
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    noise = rng.normal(0.0, 1.0, size=(labels.size, input_dim)) * noise_sigma
    return Dataset(centers[labels] + noise, labels)


def _rows_to_text(labels, values) -> str:
    buf = io.StringIO()
    for lab, row in zip(labels, values):
        buf.write(",".join([str(int(lab))] + [repr(float(v)) for v in row]))
        buf.write("\n")
    return buf.getvalue()


def save_csv_dataset(dataset: Dataset, path, header=False):
    """Write ``label,f1,...,fd`` rows; floats use shortest round-trip repr."""
    text = _rows_to_text(dataset.labels, dataset.features)
    if header:
        d = dataset.features.shape[1]
        text = ",".join(["label"] + [f"f{i + 1}" for i in range(d)]) + "\n" + text
    Path(path).write_text(text)


def save_embeddings_csv(embeddings, labels, path):
    d = np.asarray(embeddings).shape[1]
    head = ",".join(["label"] + [f"e{i + 1}" for i in range(d)]) + "\n"
    Path(path).write_text(head + _rows_to_text(labels, embeddings))


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv_dataset(path) -> Dataset:
    labels, rows = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if lineno == 1 and not _is_number(cells[0]):
                continue  # header
            if len(cells) < 2:
                raise ParseError("expected label followed by at least one feature", lineno)
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise RaggedRows(f"expected {width} columns, found {len(cells)}", lineno)
            try:
                label = float(cells[0])
                feats = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if label != int(label):
                raise ParseError(f"label {cells[0]!r} is not an integer", lineno)
            labels.append(int(label))
            rows.append(feats)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64))
