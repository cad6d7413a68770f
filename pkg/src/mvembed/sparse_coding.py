"""Per-sample L1 reconstruction and the reconstruction matrix of a view.

Each sample ``x_i`` (a row of the normalized view) is written as a sparse
combination of the other samples by solving

    min_s  0.5 * ||x_i - sum_{j != i} s_j x_j||^2 + gamma_i * ||s||_1

with cyclic coordinate descent. The solver works on the Gram matrix
``G = X X^T`` so a view with many features costs no more per sweep than one
with few, and alternates full passes with passes over the current support.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, NoConvergence


@dataclass(frozen=True)
class LassoSettings:
    """Coordinate-descent settings.

    gamma_rel : float
        L1 strength relative to the sample's largest correlation with another
        sample. Only :func:`sparse_graph` uses it; :func:`lasso_cd` takes an
        absolute penalty.
    tol : float
        Stop once the largest coefficient change in a sweep is at most this.
    max_iter : int
        Cap on coordinate passes, full and support-only passes alike.
    """

    gamma_rel: float = 0.1
    tol: float = 1e-7
    max_iter: int = 10000

    def __post_init__(self):
        if not self.gamma_rel > 0:
            raise ConfigError(f"gamma_rel must be positive, got {self.gamma_rel}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")

    def to_dict(self) -> dict:
        return {"gamma_rel": self.gamma_rel, "tol": self.tol, "max_iter": self.max_iter}


@numba.njit(cache=True, nogil=True)
def _cd_sweep(G, s, q, gamma, idx, exclude, full):
    # One cyclic pass over coordinates idx (ascending). q tracks c - G s; on
    # active-only passes (full=False) it is kept current only on idx.
    max_delta = 0.0
    for t in range(idx.shape[0]):
        j = idx[t]
        if j == exclude:
            continue
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        old = s[j]
        z = q[j] + gjj * old
        if z > gamma:
            new = (z - gamma) / gjj
        elif z < -gamma:
            new = (z + gamma) / gjj
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            if full:
                for k in range(q.shape[0]):
                    q[k] -= delta * G[k, j]
            else:
                for u in range(idx.shape[0]):
                    k = idx[u]
                    q[k] -= delta * G[k, j]
            s[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@numba.njit(cache=True, nogil=True)
def _objective_from_q(s, q, c, bb, gamma):
    # 0.5*bb - c.s + 0.5*s'Gs + gamma*|s|_1, using s'Gs = s.(c - q); needs q
    # current on the support of s only.
    obj = 0.5 * bb
    for k in range(s.shape[0]):
        if s[k] != 0.0:
            obj += -0.5 * c[k] * s[k] - 0.5 * s[k] * q[k] + gamma * abs(s[k])
    return obj


@numba.njit(cache=True, nogil=True)
def _cd_gram(G, c, bb, gamma, exclude, tol, max_iter, history):
    # Cyclic coordinate descent on the Gram form, ascending coordinate order.
    # Full passes alternate with passes restricted to the current support; a
    # full pass that moves no coordinate by more than tol ends the run.
    p = c.shape[0]
    s = np.zeros(p)
    q = c.copy()
    everything = np.arange(p)
    record = history.shape[0] > 0
    n_sweeps = 0
    while n_sweeps < max_iter:
        delta = _cd_sweep(G, s, q, gamma, everything, exclude, True)
        if record:
            history[n_sweeps] = _objective_from_q(s, q, c, bb, gamma)
        n_sweeps += 1
        if delta <= tol:
            return s, n_sweeps, True
        active = np.flatnonzero(s)
        while n_sweeps < max_iter:
            delta = _cd_sweep(G, s, q, gamma, active, exclude, False)
            if record:
                history[n_sweeps] = _objective_from_q(s, q, c, bb, gamma)
            n_sweeps += 1
            if delta <= tol:
                break
        # resynchronize q off the support before the next full pass
        for k in range(p):
            acc = c[k]
            for u in range(active.shape[0]):
                j = active[u]
                acc -= G[k, j] * s[j]
            q[k] = acc
    return s, n_sweeps, False


@numba.njit(cache=True, nogil=True)
def _graph_rows(G, gammas, rows, tol, max_iter, S, flags):
    no_history = np.empty(0)
    for t in range(rows.shape[0]):
        i = rows[t]
        c = G[:, i].copy()
        s, _, conv = _cd_gram(G, c, G[i, i], gammas[i], i, tol, max_iter, no_history)
        s[i] = 0.0
        S[i, :] = s
        flags[i] = conv


def lasso_objective(A, b, s, gamma) -> float:
    r = b - A @ s
    return 0.5 * float(r @ r) + gamma * float(np.abs(s).sum())


def lasso_cd(A, b, gamma, settings: LassoSettings = LassoSettings(), *, return_info=False):
    """Minimize ``0.5 * ||b - A s||^2 + gamma * ||s||_1`` by coordinate descent.

    Coordinates are visited in ascending column order. Columns of ``A`` that
    are identically zero keep a zero coefficient.

    If the sweep cap is reached first, a :class:`NoConvergence` warning is
    issued and the last iterate is returned.

    Parameters
    ----------
    A : ndarray, shape (n, p)
    b : ndarray, shape (n,)
    gamma : float
        Absolute L1 penalty, ``>= 0``.
    settings : LassoSettings
    return_info : bool
        Also return a dict with ``n_iter``, ``converged`` and ``objective``
        (the objective after every sweep).
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 1:
        raise ValueError(f"A must be a 2-D matrix with at least one column, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if not gamma >= 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    G = A.T @ A
    c = A.T @ b
    history = np.full(settings.max_iter if return_info else 0, np.nan)
    s, n_iter, converged = _cd_gram(
        G, c, float(b @ b), float(gamma), -1, float(settings.tol), int(settings.max_iter), history
    )
    if not converged:
        warnings.warn(
            f"lasso_cd did not converge in {settings.max_iter} sweeps", NoConvergence, stacklevel=2
        )
    if return_info:
        return s, {"n_iter": n_iter, "converged": converged, "objective": history[:n_iter]}
    return s


@dataclass
class SparseGraph:
    """Reconstruction coefficients of one view.

    ``coefficients[i, j]`` is the weight of sample ``j`` in the reconstruction
    of sample ``i``; the diagonal is zero.
    """

    coefficients: np.ndarray
    gammas: np.ndarray
    view_index: int = 0
    n_unconverged: int = 0


def _row_chunks(n, n_jobs):
    n_jobs = max(1, min(int(n_jobs), n))
    return [np.arange(k, n, n_jobs, dtype=np.int64) for k in range(n_jobs)]


def sparse_graph(X, settings: LassoSettings = LassoSettings(), view_index=0, n_jobs=1) -> SparseGraph:
    """Sparse reconstruction coefficients for every row of ``X``.

    ``X`` should already be row-normalized. The absolute penalty for row ``i``
    is ``gamma_rel * max_{j != i} |x_j . x_i|``. Rows are independent and are
    distributed across ``n_jobs`` threads; the result does not depend on
    ``n_jobs``.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"need at least two samples, got {n}")
    G = np.ascontiguousarray(X @ X.T)
    off = np.abs(G)
    np.fill_diagonal(off, 0.0)
    gammas = settings.gamma_rel * off.max(axis=1)

    S = np.zeros((n, n))
    flags = np.zeros(n, dtype=np.bool_)
    args = (float(settings.tol), int(settings.max_iter), S, flags)
    chunks = _row_chunks(n, n_jobs)
    if len(chunks) == 1:
        _graph_rows(G, gammas, chunks[0], *args)
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(lambda rows: _graph_rows(G, gammas, rows, *args), chunks))

    n_bad = int(n - flags.sum())
    if n_bad:
        warnings.warn(
            f"view {view_index}: {n_bad} of {n} rows hit the sweep cap", NoConvergence, stacklevel=2
        )
    return SparseGraph(coefficients=S, gammas=gammas, view_index=view_index, n_unconverged=n_bad)


def reconstruction_matrix(S) -> np.ndarray:
    """Reconstruction matrix ``M`` of a view, symmetrized.

    Accepts a :class:`SparseGraph` or a bare square array whose row ``i``
    holds the coefficients of sample ``i``. With samples as rows the
    column-stacked form ``(I - S_c)(I - S_c)^T`` becomes ``(I - S)^T (I - S)``,
    so that for any row-sample embedding ``Y``::

        tr(Y^T M Y) = sum_i ||y_i - sum_j S[i, j] y_j||^2
    """
    if isinstance(S, SparseGraph):
        S = S.coefficients
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError(f"S must be square, got {S.shape}")
    B = np.eye(n) - S
    M = B.T @ B
    return 0.5 * (M + M.T)
