"""Multi-view dataset container, CSV/manifest I/O, synthesis and splitting.

Samples are stored as rows throughout: a view with ``N`` samples and ``D``
features is an ``(N, D)`` float array.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadFraction,
    BadShape,
    DatasetError,
    EmptyView,
    MissingFile,
    NonFiniteEntry,
    RowCountMismatch,
)

CSV_FORMAT = "%.17g"


@dataclass
class MultiViewDataset:
    """``m`` feature matrices over the same ``N`` samples.

    Parameters
    ----------
    views : list of ndarray, each of shape (N, D_v)
    view_names : list of str, optional
        Defaults to ``view0``, ``view1``, ...
    labels : ndarray of int, shape (N,), optional
        Dense class ids ``0..C-1``.
    name : str
    label_names : list of str, optional
        Original label token for each dense id.
    """

    views: list
    view_names: Optional[list] = None
    labels: Optional[np.ndarray] = None
    name: str = "dataset"
    label_names: Optional[list] = None

    def __post_init__(self):
        if len(self.views) == 0:
            raise DatasetError("a dataset needs at least one view")
        views = []
        for v, X in enumerate(self.views):
            X = np.asarray(X, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
                raise EmptyView(f"view {v} has shape {X.shape}; expected (N, D) with N, D >= 1")
            if not np.all(np.isfinite(X)):
                raise NonFiniteEntry(f"view {v} contains NaN or Inf")
            views.append(X)
        n = views[0].shape[0]
        for v, X in enumerate(views):
            if X.shape[0] != n:
                raise RowCountMismatch(f"view {v} has {X.shape[0]} rows, view 0 has {n}")
        if n < 2:
            raise BadShape(f"need at least 2 samples, got {n}")
        self.views = views

        if self.view_names is None:
            self.view_names = [f"view{v}" for v in range(len(views))]
        self.view_names = [str(s) for s in self.view_names]
        if len(self.view_names) != len(views):
            raise DatasetError("view_names must have one entry per view")
        if len(set(self.view_names)) != len(self.view_names):
            raise DatasetError(f"duplicate view names: {self.view_names}")

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != n:
                raise RowCountMismatch(f"labels have length {labels.size}, views have {n} rows")
            if not np.issubdtype(labels.dtype, np.integer):
                raise DatasetError("labels must be integer class ids; use remap_labels first")
            labels = labels.astype(np.int64)
            present = np.unique(labels)
            if present[0] != 0 or present[-1] != present.size - 1:
                raise DatasetError("labels must be dense ids 0..C-1 with every class present")
            self.labels = labels

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list:
        return [X.shape[1] for X in self.views]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1

    def subset_views(self, indices: Sequence[int]) -> "MultiViewDataset":
        """Dataset restricted to (and reordered by) ``indices``."""
        return MultiViewDataset(
            views=[self.views[i] for i in indices],
            view_names=[self.view_names[i] for i in indices],
            labels=self.labels,
            name=self.name,
            label_names=self.label_names,
        )


def remap_labels(tokens):
    """Map arbitrary label tokens to dense ids in first-appearance order.

    Returns
    -------
    ids : ndarray of int64
    names : list of str
        ``names[k]`` is the token mapped to id ``k``.
    """
    mapping = {}
    ids = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        key = str(tok)
        if key not in mapping:
            mapping[key] = len(mapping)
        ids[i] = mapping[key]
    return ids, list(mapping)


def _read_csv(path: Path) -> np.ndarray:
    if not path.is_file():
        raise MissingFile(f"view file not found: {path}")
    if path.stat().st_size == 0:
        raise EmptyView(f"view file is empty: {path}")
    try:
        X = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from exc
    if X.size == 0:
        raise EmptyView(f"view file is empty: {path}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteEntry(f"{path} contains NaN or Inf")
    return X


def _read_labels(path: Path) -> list:
    if not path.is_file():
        raise MissingFile(f"labels file not found: {path}")
    with open(path) as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return [line.strip() for line in lines]


def load_dataset(manifest_path) -> MultiViewDataset:
    """Load a dataset described by a JSON manifest.

    The manifest has the form::

        {"name": "3sources",
         "views": [{"name": "bbc", "file": "bbc.csv"}, ...],
         "labels": "labels.txt"}

    File paths are resolved relative to the manifest's directory. View files
    are header-less comma-separated numeric CSV, one sample per row; the
    labels file holds one token per line.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or not manifest.get("views"):
        raise DatasetError("manifest must be an object with a non-empty 'views' list")

    root = manifest_path.parent
    views, names = [], []
    for k, entry in enumerate(manifest["views"]):
        if "file" not in entry:
            raise DatasetError(f"view entry {k} has no 'file'")
        X = _read_csv(root / entry["file"])
        views.append(X)
        names.append(entry.get("name", f"view{k}"))

    n = views[0].shape[0]
    for name, X in zip(names, views):
        if X.shape[0] != n:
            raise RowCountMismatch(f"view {name!r} has {X.shape[0]} rows, view {names[0]!r} has {n}")

    labels = label_names = None
    if manifest.get("labels"):
        tokens = _read_labels(root / manifest["labels"])
        if len(tokens) != n:
            raise RowCountMismatch(f"labels file has {len(tokens)} entries, views have {n} rows")
        labels, label_names = remap_labels(tokens)

    return MultiViewDataset(
        views=views,
        view_names=names,
        labels=labels,
        name=str(manifest.get("name", manifest_path.stem)),
        label_names=label_names,
    )


def write_matrix_csv(path, X) -> None:
    np.savetxt(path, np.atleast_2d(X), delimiter=",", fmt=CSV_FORMAT)


def save_dataset(dataset: MultiViewDataset, out_dir) -> Path:
    """Write ``dataset`` as a manifest directory; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, X in zip(dataset.view_names, dataset.views):
        fname = f"view_{name}.csv"
        write_matrix_csv(out_dir / fname, X)
        entries.append({"name": name, "file": fname})
    manifest = {"name": dataset.name, "views": entries}
    if dataset.labels is not None:
        names = dataset.label_names or [str(k) for k in range(dataset.n_classes)]
        with open(out_dir / "labels.txt", "w") as fh:
            fh.writelines(f"{names[k]}\n" for k in dataset.labels)
        manifest["labels"] = "labels.txt"
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def synth_multiview(
    n_samples: int,
    n_clusters: int,
    n_views: int,
    dims: Sequence[int],
    noise_sigma: float = 0.05,
    seed: int = 0,
    *,
    latent_dim: Optional[int] = None,
    cluster_std: float = 0.3,
    view_keep: float = 0.6,
) -> MultiViewDataset:
    """Draw a clustered multi-view dataset.

    Every sample gets a latent point ``center[label] + cluster_std * z``. Each
    view observes the latent points through its own random linear map and adds
    isotropic Gaussian noise of scale ``noise_sigma`` to every feature.

    A view's map only sees a random fraction ``view_keep`` of the latent
    coordinates (at least one), so individual views are partially blind and
    the views carry complementary information.

    Cluster sizes are balanced: labels are ``arange(n) % k`` before a shuffle.
    """
    dims = list(dims)
    if n_clusters < 2 or n_samples < n_clusters:
        raise BadShape(f"need n_samples >= n_clusters >= 2, got {n_samples}, {n_clusters}")
    if n_views < 1:
        raise BadShape(f"need at least one view, got {n_views}")
    if len(dims) != n_views:
        raise BadShape(f"dims has {len(dims)} entries but n_views = {n_views}")
    if any(int(D) < 2 for D in dims):
        raise BadShape(f"every view dimension must be >= 2, got {dims}")
    if noise_sigma < 0 or not math.isfinite(noise_sigma):
        raise BadShape(f"noise_sigma must be a finite non-negative number, got {noise_sigma}")
    if not 0 < view_keep <= 1:
        raise BadShape(f"view_keep must lie in (0, 1], got {view_keep}")

    L = latent_dim if latent_dim is not None else max(n_clusters, 8)
    rng = np.random.default_rng(seed)

    centers = rng.standard_normal((n_clusters, L))
    labels = rng.permutation(np.arange(n_samples) % n_clusters)
    latent = centers[labels] + cluster_std * rng.standard_normal((n_samples, L))

    n_keep = max(1, int(round(view_keep * L)))
    views = []
    for D in dims:
        W = rng.standard_normal((L, int(D))) / math.sqrt(L * int(D))
        hidden = rng.permutation(L)[n_keep:]
        W[hidden] = 0.0
        X = latent @ W + noise_sigma * rng.standard_normal((n_samples, int(D)))
        views.append(X)

    return MultiViewDataset(
        views=views,
        view_names=[f"view{v}" for v in range(n_views)],
        labels=labels.astype(np.int64),
        name=f"synth_n{n_samples}_k{n_clusters}_m{n_views}_s{seed}",
    )


def normalize_samples(X) -> np.ndarray:
    """Scale each nonzero row to unit Euclidean norm; zero rows stay zero."""
    X = np.asarray(X, dtype=np.float64)
    # pre-scale by the row max so tiny rows do not underflow when squared
    peak = np.max(np.abs(X), axis=1) if X.shape[1] else np.zeros(X.shape[0])
    nz = peak > 0
    out = X.copy()
    out[nz] /= peak[nz, None]
    out[nz] /= np.linalg.norm(out[nz], axis=1)[:, None]
    return out


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        if len(np.intersect1d(self.train, self.test)) > 0:
            raise BadFraction("train and test overlap")


def holdout_size(n: int, test_fraction: float) -> int:
    """Round-half-up of ``test_fraction * n``, clamped to ``[1, n-1]``."""
    return min(max(int(math.floor(test_fraction * n + 0.5)), 1), n - 1)


def split_labels(n: int, test_fraction: float, seed: int) -> SplitIndices:
    """Uniform random train/test partition of ``range(n)``.

    Both index arrays are returned sorted.
    """
    if n < 2:
        raise BadFraction(f"need n >= 2 to split, got {n}")
    if not 0 < test_fraction < 1:
        raise BadFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = holdout_size(n, test_fraction)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(train=np.sort(perm[n_test:]), test=np.sort(perm[:n_test]))


def file_fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_fingerprint(manifest_path) -> dict:
    """sha256 of the manifest and every file it references."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    files = [manifest_path.name] + [e["file"] for e in manifest["views"]]
    if manifest.get("labels"):
        files.append(manifest["labels"])
    root = manifest_path.parent
    return {f: file_fingerprint(root / f) for f in files if os.path.exists(root / f)}
