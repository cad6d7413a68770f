"""1NN evaluation over repeated random holdout splits.

The protocol is transductive: a method embeds all ``N`` samples once, then
each repeat draws a fresh train/test split of the labels and classifies the
test rows of every view's embedding against that view's training rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .baselines import spp_multiview, uniform_multiview
from .dataset import MultiViewDataset, split_labels
from .embedding import AmsreConfig, EmbeddingResult, fit_amsre
from .errors import DimensionMismatch, LengthMismatch, MissingLabels

METHODS: Dict[str, Callable[..., EmbeddingResult]] = {
    "amsre": fit_amsre,
    "uniform": uniform_multiview,
    "spp": spp_multiview,
}

METHOD_TITLES = {"amsre": "AMSRE", "uniform": "Uniform", "spp": "SPP", "raw": "Raw"}


def knn1_classify(train_points, train_labels, test_points) -> np.ndarray:
    """Label of the Euclidean-nearest training point for every test point.

    Exact distance ties go to the training point with the lowest index.
    """
    train = np.atleast_2d(np.asarray(train_points, dtype=np.float64))
    test = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    train_labels = np.asarray(train_labels)
    if train.shape[0] == 0:
        raise DimensionMismatch("training set is empty")
    if train.shape[1] != test.shape[1]:
        raise DimensionMismatch(f"train has {train.shape[1]} features, test has {test.shape[1]}")
    if train_labels.shape[0] != train.shape[0]:
        raise DimensionMismatch(f"{train_labels.shape[0]} labels for {train.shape[0]} training points")
    pred = np.empty(test.shape[0], dtype=train_labels.dtype)
    # explicit differences rather than the expanded quadratic form, so equal
    # distances compare equal and ties resolve by index
    for start in range(0, test.shape[0], 256):
        block = test[start:start + 256]
        dist = np.sum((block[:, None, :] - train[None, :, :]) ** 2, axis=2)
        pred[start:start + 256] = train_labels[np.argmin(dist, axis=1)]
    return pred


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"prediction shape {pred.shape} vs truth shape {truth.shape}")
    if pred.size == 0:
        raise LengthMismatch("cannot score an empty prediction")
    return float(np.mean(pred == truth))


@dataclass
class ReportTable:
    method: str
    dimension: int
    repeats: int
    per_view_mean: List[float]
    per_view_max: List[float]
    best_view_mean: float
    best_view_max: float
    per_repeat_accuracies: np.ndarray
    view_names: List[str] = field(default_factory=list)
    split_sizes: List[tuple] = field(default_factory=list)

    @classmethod
    def from_accuracies(cls, method, dimension, acc, view_names=None, split_sizes=()):
        acc = np.asarray(acc, dtype=np.float64)
        means = acc.mean(axis=0)
        maxes = acc.max(axis=0)
        return cls(
            method=method,
            dimension=int(dimension),
            repeats=acc.shape[0],
            per_view_mean=[float(x) for x in means],
            per_view_max=[float(x) for x in maxes],
            best_view_mean=float(means.max()),
            best_view_max=float(maxes.max()),
            per_repeat_accuracies=acc,
            view_names=list(view_names or [f"view{v}" for v in range(acc.shape[1])]),
            split_sizes=list(split_sizes),
        )


def evaluate_embeddings(
    views: Sequence[np.ndarray],
    labels,
    *,
    repeats=20,
    test_fraction=0.2,
    seed=0,
    method="custom",
    dimension=0,
    view_names=None,
) -> ReportTable:
    """Repeated-holdout 1NN accuracy of fixed per-view representations.

    Repeat ``k`` uses the split drawn with seed ``seed + k``.
    """
    labels = np.asarray(labels)
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    n = labels.shape[0]
    acc = np.empty((repeats, len(views)))
    sizes = []
    for k in range(repeats):
        split = split_labels(n, test_fraction, seed + k)
        sizes.append((split.train.size, split.test.size))
        for v, Y in enumerate(views):
            Y = np.asarray(Y)
            pred = knn1_classify(Y[split.train], labels[split.train], Y[split.test])
            acc[k, v] = accuracy(pred, labels[split.test])
    return ReportTable.from_accuracies(method, dimension, acc, view_names, sizes)


def run_experiment(
    dataset: MultiViewDataset,
    method: str,
    config: AmsreConfig = AmsreConfig(),
    repeats: int = 20,
    test_fraction: float = 0.2,
    seed: int = 0,
    *,
    Ms=None,
    n_jobs=1,
    result: Optional[EmbeddingResult] = None,
) -> ReportTable:
    """Embed ``dataset`` with ``method`` and score every view by 1NN.

    ``method`` is one of ``amsre``, ``uniform``, ``spp``, or ``raw`` (the
    unreduced features). A precomputed ``result`` skips the embedding step.
    """
    if dataset.labels is None:
        raise MissingLabels(f"dataset {dataset.name!r} has no labels")
    if method == "raw":
        views = dataset.views
        dimension = 0
    else:
        if result is None:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)} or 'raw'")
            result = METHODS[method](dataset, config, Ms=Ms, n_jobs=n_jobs)
        views = [e.y_matrix for e in result.embeddings]
        dimension = config.d
    return evaluate_embeddings(
        views,
        dataset.labels,
        repeats=repeats,
        test_fraction=test_fraction,
        seed=seed,
        method=method,
        dimension=dimension,
        view_names=dataset.view_names,
    )


def _g17(x) -> str:
    return format(float(x), ".17g")


def report_rows(tables: Sequence[ReportTable]) -> List[list]:
    """Header plus one row per (method, dimension)."""
    if not tables:
        return []
    names = tables[0].view_names
    header = ["method", "dimension", "repeats"]
    header += [f"mean_{n}" for n in names] + [f"max_{n}" for n in names]
    header += ["best_view_mean", "best_view_max"]
    rows = [header]
    for t in tables:
        rows.append(
            [t.method, str(t.dimension), str(t.repeats)]
            + [_g17(x) for x in t.per_view_mean]
            + [_g17(x) for x in t.per_view_max]
            + [_g17(t.best_view_mean), _g17(t.best_view_max)]
        )
    return rows


def write_report_csv(path, tables: Sequence[ReportTable]) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(report_rows(tables))


def format_report(tables: Sequence[ReportTable], title: str = "") -> str:
    """Aligned text table: one block per dimension with Mean and Max rows,
    one column per method, best-view accuracies as percentages."""
    methods = list(dict.fromkeys(t.method for t in tables))
    dims = list(dict.fromkeys(t.dimension for t in tables))
    lookup = {(t.method, t.dimension): t for t in tables}
    headers = [title, ""] + [METHOD_TITLES.get(m, m) for m in methods]
    body = []
    for d in dims:
        label = f"Dim={d}" if d else "Raw"
        for stat in ("Mean", "Max"):
            row = [label if stat == "Mean" else "", stat]
            for m in methods:
                t = lookup.get((m, d))
                if t is None:
                    row.append("-")
                else:
                    value = t.best_view_mean if stat == "Mean" else t.best_view_max
                    row.append(f"{100 * value:.2f}%")
            body.append(row)
    widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
    out = io.StringIO()
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    out.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip() + "\n")
    out.write(rule + "\n")
    for row in body:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    return out.getvalue()
