"""Reference methods: single-view sparse reconstructive embedding and the
multi-view objective with weights pinned to uniform."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .dataset import MultiViewDataset, normalize_samples
from .embedding import (
    AmsreConfig,
    Embedding,
    EmbeddingResult,
    WeightVector,
    build_graphs,
    objective,
    optimize,
    smallest_eigenvectors,
)
from .sparse_coding import LassoSettings, reconstruction_matrix, sparse_graph


def spp_embed(X, d: int, lasso: LassoSettings = LassoSettings(), *, n_jobs=1, view_index=0) -> Embedding:
    """Bottom-``d`` eigenvectors of one view's reconstruction matrix."""
    g = sparse_graph(normalize_samples(X), lasso, view_index=view_index, n_jobs=n_jobs)
    M = reconstruction_matrix(g)
    return Embedding(smallest_eigenvectors(M, d), view_index)


def spp_multiview(
    dataset: MultiViewDataset,
    config: AmsreConfig = AmsreConfig(),
    *,
    Ms: Optional[Sequence[np.ndarray]] = None,
    n_jobs=1,
) -> EmbeddingResult:
    """Run the single-view embedding on every view independently.

    Packaged as an :class:`EmbeddingResult` with uniform weights so it shares
    the output layout of the multi-view methods; the single trace entry is the
    uncoupled objective ``sum_v m**-r * tr(Y_v^T M_v Y_v)``.
    """
    config.check_dataset(dataset)
    if Ms is None:
        _, Ms = build_graphs(dataset, config.lasso, n_jobs=n_jobs)
    Ys = [Embedding(smallest_eigenvectors(M, config.d), v) for v, M in enumerate(Ms)]
    weights = WeightVector.uniform(len(Ms), config.r)
    f = objective(Ys, Ms, weights, 0.0)
    return EmbeddingResult(
        embeddings=Ys,
        weights=weights,
        objective_trace=[(0, f, weights.alphas.copy())],
        converged=True,
        iterations_used=0,
        step_objectives=[f],
    )


def uniform_multiview(
    dataset: MultiViewDataset,
    config: AmsreConfig = AmsreConfig(),
    *,
    Ms: Optional[Sequence[np.ndarray]] = None,
    n_jobs=1,
    keep_snapshots=False,
) -> EmbeddingResult:
    """Coupled multi-view fit with every weight fixed at ``1/m``."""
    config.check_dataset(dataset)
    if Ms is None:
        _, Ms = build_graphs(dataset, config.lasso, n_jobs=n_jobs)
    return optimize(Ms, config, learn_weights=False, keep_snapshots=keep_snapshots)
