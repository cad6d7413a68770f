import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvembed.dataset import MultiViewDataset, synth_multiview
from mvembed.embedding import (
    AmsreConfig,
    Embedding,
    WeightVector,
    coupling_total,
    fit_amsre,
    init_embeddings,
    objective,
    optimize,
    smallest_eigenvectors,
    update_view,
    update_weights,
    view_costs,
    view_subproblem_matrix,
    weights_from_costs,
)
from mvembed.errors import ConfigError, DegenerateWeights, EigenFailure
from mvembed.sparse_coding import LassoSettings, reconstruction_matrix

import oracles


def random_M(rng, n, scale=0.3):
    S = scale * rng.standard_normal((n, n))
    np.fill_diagonal(S, 0.0)
    return reconstruction_matrix(S)


def random_orthonormal(rng, n, d):
    Q, _ = np.linalg.qr(rng.standard_normal((n, d)))
    return Q


class TestSmallestEigenvectors:
    def test_diagonal(self):
        Y = smallest_eigenvectors(np.diag([3.0, 1.0, 2.0]), 1)
        np.testing.assert_array_equal(Y[:, 0], [0.0, 1.0, 0.0])

    def test_two_by_two(self):
        Y, w = smallest_eigenvectors(np.array([[2.0, 1.0], [1.0, 2.0]]), 1, return_values=True)
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(Y[:, 0], [r, -r], rtol=0, atol=1e-15)
        assert w[0] == pytest.approx(1.0, abs=1e-14)

    def test_sign_convention_largest_entry_positive(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            B = rng.standard_normal((7, 7))
            Y = smallest_eigenvectors(B + B.T, 3)
            for k in range(3):
                assert Y[np.argmax(np.abs(Y[:, k])), k] > 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.data())
    def test_residual_and_trace(self, seed, n, data):
        d = data.draw(st.integers(1, n))
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((n, n))
        A = B + B.T
        Y, w = smallest_eigenvectors(A, d, return_values=True)
        assert np.max(np.abs(Y.T @ Y - np.eye(d))) < 1e-10
        assert np.max(np.abs(A @ Y - Y * w)) < 1e-8
        assert np.all(np.diff(w) >= 0)
        assert np.trace(Y.T @ A @ Y) == pytest.approx(oracles.full_spectrum(A)[:d].sum(), abs=1e-8)

    @pytest.mark.parametrize("d", [0, 4])
    def test_bad_d(self, d):
        with pytest.raises(ValueError):
            smallest_eigenvectors(np.eye(3), d)

    def test_non_finite_is_eigen_failure(self):
        A = np.eye(3)
        A[0, 1] = A[1, 0] = np.nan
        with pytest.raises(EigenFailure):
            smallest_eigenvectors(A, 1)


class TestInit:
    def test_identity_M(self):
        (Y,) = init_embeddings([np.eye(6)], 2)
        np.testing.assert_allclose(Y.y_matrix.T @ Y.y_matrix, np.eye(2), atol=1e-12)
        assert np.trace(Y.y_matrix.T @ Y.y_matrix) == pytest.approx(2.0)

    def test_identical_views_identical_init(self):
        M = random_M(np.random.default_rng(1), 8)
        a, b = init_embeddings([M, M.copy()], 3)
        assert a.y_matrix.tobytes() == b.y_matrix.tobytes()
        assert (a.view_index, b.view_index) == (0, 1)

    def test_trace_is_bottom_eigen_sum(self):
        M = random_M(np.random.default_rng(2), 8)
        (Y,) = init_embeddings([M], 2)
        tr = np.trace(Y.y_matrix.T @ M @ Y.y_matrix)
        assert tr == pytest.approx(oracles.full_spectrum(M)[:2].sum(), abs=1e-10)

    def test_mismatched_sizes(self):
        with pytest.raises(ValueError):
            init_embeddings([np.eye(3), np.eye(4)], 1)


class TestSubproblem:
    def test_lambda_zero(self):
        M = random_M(np.random.default_rng(3), 5)
        Ys = [random_orthonormal(np.random.default_rng(4), 5, 2) for _ in range(2)]
        A = view_subproblem_matrix(0, Ys, M, 0.3, 2.0, 0.0)
        np.testing.assert_array_equal(A, 0.5 * ((0.09 * M) + (0.09 * M).T))
        np.testing.assert_allclose(A, 0.09 * M, rtol=1e-15, atol=0)

    def test_single_view(self):
        M = random_M(np.random.default_rng(5), 5)
        Y = random_orthonormal(np.random.default_rng(6), 5, 2)
        np.testing.assert_allclose(view_subproblem_matrix(0, [Y], M, 1.0, 2.0, 0.7), M, atol=1e-15)

    @pytest.mark.parametrize("sign", [-1, 1])
    def test_matches_naive(self, sign):
        rng = np.random.default_rng(7)
        M = random_M(rng, 4)
        Ys = [random_orthonormal(rng, 4, 1) for _ in range(3)]
        A = view_subproblem_matrix(1, Ys, M, 0.4, 2.5, 0.8, sign)
        np.testing.assert_allclose(A, oracles.naive_subproblem(1, Ys, M, 0.4, 2.5, 0.8, sign), rtol=0, atol=1e-12)
        assert np.array_equal(A, A.T)


class TestUpdateView:
    def test_lambda_zero_alpha_one_is_init(self):
        M = random_M(np.random.default_rng(8), 9)
        (Y0,) = init_embeddings([M], 2)
        w = WeightVector(np.array([1.0, 0.0]), 2.0)
        Y = update_view(0, [Y0, Y0], M, w, AmsreConfig(d=2, lam=0.0))
        np.testing.assert_allclose(Y.y_matrix, Y0.y_matrix, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
    def test_never_increases_objective(self, seed, lam):
        rng = np.random.default_rng(seed)
        Ms = [random_M(rng, 10) for _ in range(3)]
        Ys = [Embedding(random_orthonormal(rng, 10, 2), v) for v in range(3)]
        w = WeightVector(oracles.random_simplex(rng, 3), 2.0)
        cfg = AmsreConfig(d=2, lam=lam)
        before = objective(Ys, Ms, w, lam)
        v = int(rng.integers(3))
        Ys[v] = update_view(v, Ys, Ms[v], w, cfg)
        after = objective(Ys, Ms, w, lam)
        assert after <= before + 1e-9 * max(1.0, abs(before))
        # argmin consistency
        A = view_subproblem_matrix(v, Ys, Ms[v], w.alphas[v], w.r, lam)
        Y = Ys[v].y_matrix
        assert np.trace(Y.T @ A @ Y) == pytest.approx(oracles.full_spectrum(A)[:2].sum(), abs=1e-8)

    def test_single_view_fixed_point(self):
        M = random_M(np.random.default_rng(9), 8)
        w = WeightVector(np.array([1.0]), 2.0)
        cfg = AmsreConfig(d=3, lam=0.5)
        Y1 = update_view(0, init_embeddings([M], 3), M, w, cfg)
        Y2 = update_view(0, [Y1], M, w, cfg)
        assert Y1.y_matrix.tobytes() == Y2.y_matrix.tobytes()


class TestWeights:
    def test_equal_costs_uniform(self):
        w = weights_from_costs([2.0, 2.0, 2.0, 2.0], 3.0)
        np.testing.assert_allclose(w.alphas, 0.25, rtol=0, atol=1e-12)

    def test_two_views_r2(self):
        w = weights_from_costs([1.0, 3.0], 2.0)
        np.testing.assert_array_equal(w.alphas, [0.75, 0.25])

    def test_large_r_near_uniform(self):
        w = weights_from_costs([1.0, 2.0, 3.0], 101.0)
        assert w.alphas.max() - w.alphas.min() < 0.02

    def test_floor_and_degenerate(self):
        with pytest.warns(DegenerateWeights):
            w = weights_from_costs([0.0, 1e-14], 2.0)
        np.testing.assert_array_equal(w.alphas, [0.5, 0.5])

    def test_one_floored_cost_dominates(self):
        w = weights_from_costs([0.0, 1.0], 2.0)
        assert w.alphas[0] > 0.999999

    def test_r_must_exceed_one(self):
        with pytest.raises(ValueError):
            weights_from_costs([1.0, 2.0], 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.sampled_from([1.5, 2.0, 5.0]))
    def test_beats_simplex_probes(self, seed, m, r):
        rng = np.random.default_rng(seed)
        c = rng.uniform(0.01, 10.0, m)
        w = weights_from_costs(c, r)
        assert abs(w.alphas.sum() - 1) < 1e-12 and np.all(w.alphas >= 0)
        best = np.sum(w.alphas ** r * c)
        P = rng.dirichlet(np.ones(m), 1000)
        assert np.all(best <= (P ** r) @ c + 1e-12)

    def test_update_weights_uses_traces(self):
        rng = np.random.default_rng(10)
        Ms = [random_M(rng, 6) for _ in range(2)]
        Ys = init_embeddings(Ms, 2)
        c = [np.trace(Y.y_matrix.T @ M @ Y.y_matrix) for Y, M in zip(Ys, Ms)]
        np.testing.assert_allclose(view_costs(Ys, Ms), c, rtol=1e-12)
        np.testing.assert_allclose(update_weights(Ys, Ms, 2.0).alphas, weights_from_costs(c, 2.0).alphas)


class TestObjective:
    def test_lambda_zero(self):
        rng = np.random.default_rng(11)
        Ms = [random_M(rng, 6) for _ in range(2)]
        Ys = [random_orthonormal(rng, 6, 2) for _ in range(2)]
        w = WeightVector(np.array([0.3, 0.7]), 2.0)
        expected = sum(a ** 2 * np.trace(Y.T @ M @ Y) for a, Y, M in zip(w.alphas, Ys, Ms))
        assert objective(Ys, Ms, w, 0.0) == pytest.approx(expected, rel=1e-13)

    def test_identical_embeddings_coupling(self):
        rng = np.random.default_rng(12)
        Y = random_orthonormal(rng, 9, 3)
        m, d, lam = 4, 3, 0.7
        assert coupling_total([Y] * m) == pytest.approx(d * m * (m - 1) / 2, rel=1e-13)
        Ms = [np.zeros((9, 9))] * m
        w = WeightVector.uniform(m, 2.0)
        assert objective([Y] * m, Ms, w, lam) == pytest.approx(-lam * d * m * (m - 1) / 2, rel=1e-13)

    @pytest.mark.parametrize("sign", [-1, 1])
    def test_matches_naive(self, sign):
        rng = np.random.default_rng(13)
        Ms = [random_M(rng, 6) for _ in range(2)]
        Ys = [random_orthonormal(rng, 6, 2) for _ in range(2)]
        w = WeightVector(oracles.random_simplex(rng, 2), 2.0)
        got = objective(Ys, Ms, w, 0.4, sign)
        assert got == pytest.approx(oracles.naive_objective(Ys, Ms, w.alphas, 2.0, 0.4, sign), abs=1e-12)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(d=0), dict(lam=-0.1), dict(r=1.0), dict(max_outer_iter=0), dict(conv_tol=0.0), dict(coupling_sign=0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            AmsreConfig(**kwargs)

    def test_dict_roundtrip(self):
        c = AmsreConfig(d=4, lam=0.2, r=3.0, lasso=LassoSettings(gamma_rel=0.05), seed=9)
        assert AmsreConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            AmsreConfig.from_dict({"d": 3, "lamda": 0.1})

    def test_dataset_shape_checks(self):
        ds = MultiViewDataset([np.ones((20, 5)), np.ones((20, 8))])
        AmsreConfig(d=4).check_dataset(ds)
        with pytest.raises(ConfigError):
            AmsreConfig(d=5).check_dataset(ds)
        small = MultiViewDataset([np.ones((3, 9))])
        with pytest.raises(ConfigError):
            AmsreConfig(d=4).check_dataset(small)


def small_dataset(seed, m=3, n=20, dims=(6, 7, 8)):
    rng = np.random.default_rng(seed)
    return MultiViewDataset([rng.standard_normal((n, D)) for D in dims[:m]])


class TestFit:
    def test_invariants_every_half_step(self):
        ds = small_dataset(0)
        res = fit_amsre(ds, AmsreConfig(d=3, lam=0.1), keep_snapshots=True)
        for Ys, alphas in res.snapshots:
            for Y in Ys:
                assert np.max(np.abs(Y.T @ Y - np.eye(3))) < 1e-8
            assert abs(alphas.sum() - 1) < 1e-12 and np.all(alphas >= 0)
        steps = np.array(res.step_objectives)
        assert np.all(np.diff(steps) <= 1e-9 * np.abs(steps[:-1]))
        assert len(steps) == 1 + res.iterations_used * (ds.n_views + 1)

    def test_trace_layout(self):
        res = fit_amsre(small_dataset(1), AmsreConfig(d=2, lam=0.0))
        assert res.objective_trace[0][0] == 0
        assert [t[0] for t in res.objective_trace] == list(range(res.iterations_used + 1))
        assert res.objective_trace[-1][1] == res.step_objectives[-1]

    def test_single_view_is_spp(self):
        from mvembed.baselines import spp_embed

        ds = small_dataset(2, m=1)
        res = fit_amsre(ds, AmsreConfig(d=3, lam=0.3))
        np.testing.assert_array_equal(res.weights.alphas, [1.0])
        from mvembed.dataset import normalize_samples

        ref = spp_embed(normalize_samples(ds.views[0]), 3, LassoSettings())
        np.testing.assert_allclose(res.embeddings[0].y_matrix, ref.y_matrix, atol=1e-10)

    def test_identical_views(self):
        X = np.random.default_rng(3).standard_normal((20, 6))
        ds = MultiViewDataset([X, X.copy()])
        res = fit_amsre(ds, AmsreConfig(d=2, lam=0.1))
        np.testing.assert_allclose(res.weights.alphas, [0.5, 0.5], atol=1e-6)
        np.testing.assert_allclose(res.embeddings[0].y_matrix, res.embeddings[1].y_matrix, atol=1e-6)

    def test_view_order_permutation_uncoupled(self):
        rng = np.random.default_rng(4)
        Ms = [random_M(rng, 15) for _ in range(3)]
        perm = [2, 0, 1]
        cfg = AmsreConfig(d=3, lam=0.0)
        a = optimize(Ms, cfg)
        b = optimize([Ms[p] for p in perm], cfg)
        np.testing.assert_allclose(a.objectives, b.objectives, rtol=1e-9)
        np.testing.assert_allclose(b.weights.alphas[np.argsort(perm)], a.weights.alphas, atol=1e-12)

    def test_view_order_permutation_initial_value(self):
        # with coupling the sweep is order dependent, only the start agrees
        rng = np.random.default_rng(5)
        Ms = [random_M(rng, 15) for _ in range(3)]
        cfg = AmsreConfig(d=3, lam=0.1)
        a = optimize(Ms, cfg)
        b = optimize([Ms[2], Ms[0], Ms[1]], cfg)
        assert a.objectives[0] == pytest.approx(b.objectives[0], rel=1e-12)

    def test_deterministic(self):
        ds = small_dataset(6)
        a = fit_amsre(ds, AmsreConfig(d=3, lam=0.1, max_outer_iter=10))
        b = fit_amsre(ds, AmsreConfig(d=3, lam=0.1, max_outer_iter=10))
        assert all(x.y_matrix.tobytes() == y.y_matrix.tobytes() for x, y in zip(a.embeddings, b.embeddings))
        assert a.objectives.tobytes() == b.objectives.tobytes()

    def test_max_iter_cap(self):
        res = fit_amsre(small_dataset(7), AmsreConfig(d=3, lam=1.0, max_outer_iter=2, conv_tol=1e-15))
        assert res.iterations_used == 2 and not res.converged

    def test_synthetic_converges_quickly(self):
        # N=300, m=3, k=5, seed 7 at the default lambda
        ds = synth_multiview(300, 5, 3, [50, 50, 50], 0.05, seed=7)
        res = fit_amsre(ds, AmsreConfig(d=10))
        assert res.converged and res.iterations_used <= 50
