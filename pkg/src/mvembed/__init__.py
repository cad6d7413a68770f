"""Auto-weighted multi-view sparse reconstructive embedding."""

from .baselines import spp_embed, spp_multiview, uniform_multiview
from .dataset import (
    MultiViewDataset,
    SplitIndices,
    load_dataset,
    normalize_samples,
    save_dataset,
    split_labels,
    synth_multiview,
)
from .embedding import (
    AmsreConfig,
    Embedding,
    EmbeddingResult,
    WeightVector,
    fit_amsre,
    objective,
    smallest_eigenvectors,
    update_weights,
)
from .evaluation import ReportTable, accuracy, knn1_classify, run_experiment
from .sparse_coding import LassoSettings, lasso_cd, reconstruction_matrix, sparse_graph

__version__ = "0.1.0"
