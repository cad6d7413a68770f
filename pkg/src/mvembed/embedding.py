"""Auto-weighted multi-view sparse reconstructive embedding.

The optimizer minimizes, over per-view embeddings ``Y_v`` (``N x d``,
orthonormal columns) and simplex weights ``alpha``::

    sum_v alpha_v**r * tr(Y_v^T M_v Y_v)
        - lam * sum_{v < w} ||Y_v^T Y_w||_F**2

The second term rewards agreement between the views' similarity matrices
``Y_v Y_v^T``. Both block updates are exact, so the objective never increases:
each ``Y_v`` is the bottom-``d`` eigenspace of
``alpha_v**r M_v - lam * sum_{w != v} Y_w Y_w^T``, and ``alpha`` has a closed
form given the per-view costs.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from .dataset import MultiViewDataset, normalize_samples
from .errors import ConfigError, DegenerateWeights, EigenFailure
from .sparse_coding import LassoSettings, reconstruction_matrix, sparse_graph

log = logging.getLogger(__name__)

COST_FLOOR = 1e-12


@dataclass(frozen=True)
class AmsreConfig:
    """Hyperparameters of a fit.

    ``coupling_sign`` is ``-1`` for the agreement-rewarding objective above;
    ``+1`` flips the coupling term to the literal ``+lam`` form and exists for
    debugging only.
    """

    d: int = 10
    lam: float = 0.005
    r: float = 2.0
    lasso: LassoSettings = field(default_factory=LassoSettings)
    max_outer_iter: int = 100
    conv_tol: float = 1e-6
    seed: int = 0
    coupling_sign: int = -1

    def __post_init__(self):
        if int(self.d) < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not self.lam >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.r > 1:
            raise ConfigError(f"r must be > 1, got {self.r}")
        if int(self.max_outer_iter) < 1:
            raise ConfigError(f"max_outer_iter must be >= 1, got {self.max_outer_iter}")
        if not self.conv_tol > 0:
            raise ConfigError(f"conv_tol must be > 0, got {self.conv_tol}")
        if self.coupling_sign not in (-1, 1):
            raise ConfigError(f"coupling_sign must be -1 or +1, got {self.coupling_sign}")

    def check_dataset(self, dataset: MultiViewDataset) -> None:
        dmin = min(dataset.dims)
        if self.d >= dmin:
            raise ConfigError(f"d={self.d} must be smaller than the smallest view dimension ({dmin})")
        if self.d > dataset.n_samples:
            raise ConfigError(f"d={self.d} exceeds the number of samples ({dataset.n_samples})")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "lambda": self.lam,
            "r": self.r,
            "lasso": self.lasso.to_dict(),
            "max_outer_iter": self.max_outer_iter,
            "conv_tol": self.conv_tol,
            "seed": self.seed,
            "coupling_sign": self.coupling_sign,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AmsreConfig":
        data = dict(data)
        unknown = set(data) - {
            "d", "lambda", "r", "lasso", "max_outer_iter", "conv_tol", "seed", "coupling_sign"
        }
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        if "lambda" in data:
            kwargs["lam"] = float(data.pop("lambda"))
        if "lasso" in data:
            try:
                kwargs["lasso"] = LassoSettings(**data.pop("lasso"))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad lasso settings: {exc}") from exc
        kwargs.update(data)
        return cls(**kwargs)


@dataclass
class Embedding:
    y_matrix: np.ndarray
    view_index: int = 0


@dataclass
class WeightVector:
    alphas: np.ndarray
    r: float

    @classmethod
    def uniform(cls, m: int, r: float) -> "WeightVector":
        return cls(np.full(m, 1.0 / m), r)


@dataclass
class EmbeddingResult:
    """Output of :func:`fit_amsre`.

    ``objective_trace`` holds ``(iteration, objective, alphas)`` after the
    initialization (iteration 0) and after every outer iteration.
    ``step_objectives`` additionally records the objective after every view
    update and every weight update, in execution order, starting with the
    initial value.
    """

    embeddings: List[Embedding]
    weights: WeightVector
    objective_trace: list
    converged: bool
    iterations_used: int
    step_objectives: list = field(default_factory=list)
    snapshots: Optional[list] = None

    @property
    def objectives(self) -> np.ndarray:
        return np.array([t[1] for t in self.objective_trace])


def smallest_eigenvectors(A, d: int, *, return_values=False):
    """Eigenvectors of the ``d`` algebraically smallest eigenvalues of ``A``.

    Columns are ordered by ascending eigenvalue. Each column is signed so its
    entry of largest magnitude is positive; among entries tied in magnitude
    (to a relative 1e-10) the one with the lowest index decides.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= {n}, got {d}")
    try:
        w, V = scipy.linalg.eigh(A, subset_by_index=[0, d - 1], check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    # magnitudes within rounding of the column max count as ties; argmax on
    # the boolean mask returns the first of them
    absV = np.abs(V)
    pivot = np.argmax(absV >= absV.max(axis=0) * (1.0 - 1e-10), axis=0)
    signs = np.sign(V[pivot, np.arange(d)])
    signs[signs == 0] = 1.0
    V = V * signs
    if return_values:
        return V, w
    return V


def init_embeddings(Ms: Sequence[np.ndarray], d: int) -> List[Embedding]:
    """Independent single-view solutions: bottom-``d`` eigenvectors of each ``M``."""
    n = Ms[0].shape[0]
    if any(M.shape != (n, n) for M in Ms):
        raise ValueError("all reconstruction matrices must share N")
    return [Embedding(smallest_eigenvectors(M, d), v) for v, M in enumerate(Ms)]


def _as_array(Y):
    return Y.y_matrix if isinstance(Y, Embedding) else np.asarray(Y)


def view_subproblem_matrix(v, Ys, M_v, alpha_v, r, lam, coupling_sign=-1) -> np.ndarray:
    """``alpha_v**r M_v + sign * lam * sum_{w != v} Y_w Y_w^T``, symmetrized."""
    A = (alpha_v ** r) * np.asarray(M_v, dtype=np.float64)
    if lam != 0:
        for w, Y in enumerate(Ys):
            if w == v:
                continue
            Y = _as_array(Y)
            A = A + (coupling_sign * lam) * (Y @ Y.T)
    return 0.5 * (A + A.T)


def update_view(v, Ys, M_v, weights: WeightVector, config: AmsreConfig) -> Embedding:
    A = view_subproblem_matrix(
        v, Ys, M_v, weights.alphas[v], weights.r, config.lam, config.coupling_sign
    )
    return Embedding(smallest_eigenvectors(A, config.d), v)


def view_costs(Ys, Ms) -> np.ndarray:
    """``tr(Y_v^T M_v Y_v)`` for every view."""
    return np.array([float(np.sum(_as_array(Y) * (M @ _as_array(Y)))) for Y, M in zip(Ys, Ms)])


def weights_from_costs(costs, r: float) -> WeightVector:
    """Minimizer of ``sum_v alpha_v**r c_v`` over the simplex.

    ``alpha_v`` is proportional to ``c_v**(-1/(r-1))``. Costs are floored at
    ``COST_FLOOR``; when every cost sits at the floor the weights are uniform
    and a :class:`DegenerateWeights` warning is issued.
    """
    if not r > 1:
        raise ValueError(f"r must be > 1, got {r}")
    c = np.maximum(np.asarray(costs, dtype=np.float64), COST_FLOOR)
    m = c.size
    if np.all(c <= COST_FLOOR):
        warnings.warn("all view costs are at the floor; using uniform weights", DegenerateWeights, stacklevel=2)
        return WeightVector.uniform(m, r)
    # ratios <= 1 keep the power from overflowing for r close to 1
    ratios = (c.min() / c) ** (1.0 / (r - 1.0))
    return WeightVector(ratios / ratios.sum(), r)


def update_weights(Ys, Ms, r: float) -> WeightVector:
    return weights_from_costs(view_costs(Ys, Ms), r)


def coupling_total(Ys) -> float:
    """``sum_{v < w} ||Y_v^T Y_w||_F**2``, equal to ``tr(K_v K_w)`` summed over pairs."""
    arrays = [_as_array(Y) for Y in Ys]
    total = 0.0
    for v in range(len(arrays)):
        for w in range(v + 1, len(arrays)):
            C = arrays[v].T @ arrays[w]
            total += float(np.sum(C * C))
    return total


def objective(Ys, Ms, weights: WeightVector, lam: float, coupling_sign=-1) -> float:
    costs = view_costs(Ys, Ms)
    value = float(np.sum(weights.alphas ** weights.r * costs))
    if lam != 0:
        value += coupling_sign * lam * coupling_total(Ys)
    return value


def build_graphs(dataset: MultiViewDataset, lasso: LassoSettings, n_jobs=1):
    """Normalize every view and compute its sparse graph and reconstruction matrix.

    Returns
    -------
    graphs : list of SparseGraph
    Ms : list of ndarray
    """
    graphs, Ms = [], []
    for v, X in enumerate(dataset.views):
        g = sparse_graph(normalize_samples(X), lasso, view_index=v, n_jobs=n_jobs)
        graphs.append(g)
        Ms.append(reconstruction_matrix(g))
        log.debug("view %d: %d nonzero coefficients", v, int(np.count_nonzero(g.coefficients)))
    return graphs, Ms


def _relative_change(prev, cur):
    return abs(cur - prev) / max(abs(prev), np.finfo(float).tiny)


def optimize(
    Ms: Sequence[np.ndarray],
    config: AmsreConfig,
    *,
    learn_weights=True,
    keep_snapshots=False,
) -> EmbeddingResult:
    """Alternating minimization from the single-view initialization.

    Parameters
    ----------
    Ms : list of ndarray
        Reconstruction matrices, one per view.
    config : AmsreConfig
    learn_weights : bool
        If False the weights stay uniform (the uniform-weight ablation).
    keep_snapshots : bool
        Keep a copy of every ``Y_v`` and ``alpha`` after each half-step in
        ``result.snapshots``, for invariant checks.
    """
    m = len(Ms)
    n = Ms[0].shape[0]
    if not config.d <= n:
        raise ConfigError(f"d={config.d} exceeds the number of samples ({n})")
    lam, sign = config.lam, config.coupling_sign

    Ys = init_embeddings(Ms, config.d)
    weights = WeightVector.uniform(m, config.r)
    f = objective(Ys, Ms, weights, lam, sign)
    trace = [(0, f, weights.alphas.copy())]
    steps = [f]
    snaps = [] if keep_snapshots else None

    def snapshot():
        if keep_snapshots:
            snaps.append(([Y.y_matrix.copy() for Y in Ys], weights.alphas.copy()))

    snapshot()
    converged = False
    it = 0
    for it in range(1, config.max_outer_iter + 1):
        for v in range(m):
            Ys[v] = update_view(v, Ys, Ms[v], weights, config)
            steps.append(objective(Ys, Ms, weights, lam, sign))
            snapshot()
        if learn_weights:
            weights = update_weights(Ys, Ms, config.r)
        f_new = objective(Ys, Ms, weights, lam, sign)
        steps.append(f_new)
        snapshot()
        trace.append((it, f_new, weights.alphas.copy()))
        change = _relative_change(f, f_new)
        log.debug("iter %d: objective %.12g (rel change %.3g)", it, f_new, change)
        f = f_new
        if change < config.conv_tol:
            converged = True
            break

    return EmbeddingResult(
        embeddings=list(Ys),
        weights=weights,
        objective_trace=trace,
        converged=converged,
        iterations_used=it,
        step_objectives=steps,
        snapshots=snaps,
    )


def fit_amsre(
    dataset: MultiViewDataset,
    config: AmsreConfig = AmsreConfig(),
    *,
    Ms: Optional[Sequence[np.ndarray]] = None,
    n_jobs=1,
    keep_snapshots=False,
) -> EmbeddingResult:
    """Fit per-view embeddings and view weights on ``dataset``.

    Views are row-normalized, their sparse graphs and reconstruction matrices
    are computed once (they depend on the data only), and the alternating
    scheme runs until the relative objective change drops below
    ``config.conv_tol`` or ``config.max_outer_iter`` iterations pass.

    Precomputed reconstruction matrices can be passed as ``Ms`` to share them
    between fits with different hyperparameters.
    """
    config.check_dataset(dataset)
    if Ms is None:
        _, Ms = build_graphs(dataset, config.lasso, n_jobs=n_jobs)
    return optimize(Ms, config, keep_snapshots=keep_snapshots)
