import numpy as np
import pytest

from kronsketch.linalg import DimensionError, RegularizationError, kron_chain, thin_svd
from kronsketch.sketches import ConfigurationError
from kronsketch.solvers import (
    SplineSpec,
    lowrank_query,
    materialize_lowrank,
    regression_query,
    spline_query,
    statistical_dimension,
)
from kronsketch.oracle import exact_kron_regression, exact_lowrank, exact_spline
from kronsketch.tree import TensorTree, TreeConfig

RNG = np.random.default_rng(2718)


def first_difference(d):
    L = np.zeros((d - 1, d))
    for i in range(d - 1):
        L[i, i] = 1.0
        L[i, i + 1] = -1.0
    return L


def full_rank_tree(factors, m, seed=0, **cfg):
    """Tree whose root is guaranteed full column rank (retries seeds)."""
    d = int(np.prod([f.shape[1] for f in factors]))
    for s in range(seed, seed + 50):
        tree = TensorTree(factors, TreeConfig(m=m, seed=s, **cfg))
        if np.linalg.matrix_rank(tree.root) == d:
            return tree
    raise AssertionError("no full-rank sketch found")


class TestRegressionQuery:
    def test_identity_design_returns_label(self):
        tree = full_rank_tree([np.eye(2), np.eye(2)], m=32)
        b = RNG.standard_normal(4)
        x = regression_query(tree, tree.sketch_vector(b))
        assert np.allclose(x, b, atol=1e-8)

    def test_consistent_system_zero_residual(self):
        factors = [RNG.standard_normal((6, 2)) for _ in range(2)]
        tree = full_rank_tree(factors, m=32)
        z = RNG.standard_normal(4)
        A = kron_chain(factors)
        b = A @ z
        x = regression_query(tree, tree.sketch_vector(b))
        assert np.linalg.norm(A @ x - b) <= 1e-6 * np.linalg.norm(b)

    def test_m_below_d_rejected(self):
        factors = [RNG.standard_normal((4, 2)) for _ in range(3)]
        tree = TensorTree(factors, TreeConfig(m=4, seed=1))
        with pytest.raises(ConfigurationError):
            regression_query(tree, np.zeros(4))

    def test_wrong_sketch_length_rejected(self):
        tree = TensorTree([np.eye(2)], TreeConfig(m=8, seed=2))
        with pytest.raises(DimensionError):
            regression_query(tree, np.zeros(5))

    def test_oracle_ratio_smoke(self):
        hits = 0
        for trial in range(20):
            rng = np.random.default_rng(900 + trial)
            factors = [rng.standard_normal((8, 2)) for _ in range(3)]
            tree = TensorTree(factors, TreeConfig(m=700, seed=3000 + trial))
            b = rng.standard_normal(512)
            x = regression_query(tree, tree.sketch_vector(b))
            exact = exact_kron_regression(factors, b)
            achieved = np.linalg.norm(kron_chain(factors) @ x - b)
            hits += achieved <= 1.5 * exact.opt_cost
        assert hits >= 18

    def test_scale_equivariance(self):
        rng = np.random.default_rng(31)
        factors = [rng.standard_normal((5, 2)) for _ in range(2)]
        b = rng.standard_normal(25)
        cfg = dict(m=24, seed=8)
        tree = full_rank_tree(factors, **cfg)
        x = regression_query(tree, tree.sketch_vector(b))
        scaled = [3.0 * factors[0], factors[1]]
        tree2 = TensorTree(scaled, TreeConfig(**cfg))
        x2 = regression_query(tree2, tree2.sketch_vector(3.0 * b))
        assert np.allclose(x, x2, rtol=1e-9, atol=1e-9)


class TestSplineQuery:
    def test_reduces_to_regression_at_zero(self):
        factors = [RNG.standard_normal((6, 2)) for _ in range(2)]
        tree = full_rank_tree(factors, m=40, seed=4)
        b = RNG.standard_normal(36)
        bs = tree.sketch_vector(b)
        spline = SplineSpec(np.eye(4), 0.0)
        assert np.allclose(
            spline_query(tree, bs, spline), regression_query(tree, bs), atol=1e-8
        )

    def test_huge_penalty_shrinks_to_zero(self):
        factors = [RNG.standard_normal((6, 2)) for _ in range(2)]
        tree = full_rank_tree(factors, m=40, seed=5)
        b = RNG.standard_normal(36)
        bs = tree.sketch_vector(b)
        x = spline_query(tree, bs, SplineSpec(np.eye(4), 1e12))
        m_t_b = np.linalg.norm(tree.root.T @ bs)
        assert np.linalg.norm(x) <= 1e-6 * m_t_b

    def test_matches_normal_equation_form(self):
        factors = [RNG.standard_normal((6, 2)) for _ in range(2)]
        tree = full_rank_tree(factors, m=40, seed=6)
        b = RNG.standard_normal(36)
        bs = tree.sketch_vector(b)
        L = first_difference(4)
        lam = 0.7
        x = spline_query(tree, bs, SplineSpec(L, lam))
        M = tree.root
        closed = np.linalg.solve(M.T @ M + lam * L.T @ L, M.T @ bs)
        assert np.allclose(x, closed, atol=1e-8 * max(1.0, np.linalg.norm(closed)))

    def test_singular_normal_matrix_rejected(self):
        # rank-deficient design with lam = 0 leaves the problem singular
        factors = [np.ones((4, 2))]
        tree = TensorTree(factors, TreeConfig(m=12, seed=7))
        with pytest.raises(RegularizationError):
            spline_query(tree, np.zeros(12), SplineSpec(np.zeros((1, 2)), 0.0))

    def test_oracle_ratio_smoke(self):
        hits = 0
        L = first_difference(4)
        for trial in range(20):
            rng = np.random.default_rng(1500 + trial)
            factors = [rng.standard_normal((6, 2)) for _ in range(2)]
            spline = SplineSpec(L, 1.0)
            tree = TensorTree(factors, TreeConfig(m=300, seed=4000 + trial))
            b = rng.standard_normal(36)
            x = spline_query(tree, tree.sketch_vector(b), spline)
            A = kron_chain(factors)
            achieved = np.linalg.norm(A @ x - b) ** 2 + np.linalg.norm(L @ x) ** 2
            hits += achieved <= 1.5 * exact_spline(factors, b, spline).opt_cost
        assert hits >= 18


class TestStatisticalDimension:
    def test_zero_penalty_gives_d(self):
        A = RNG.standard_normal((10, 4))
        assert statistical_dimension(A, SplineSpec(first_difference(4), 0.0)) == 4.0

    def test_infinite_penalty_limit(self):
        A = RNG.standard_normal((10, 4))
        sd = statistical_dimension(A, SplineSpec(first_difference(4), 1e14))
        assert abs(sd - 1.0) <= 1e-6  # d - p = 1

    def test_hand_example(self):
        sd = statistical_dimension(np.diag([2.0, 1.0]), SplineSpec(np.eye(2), 1.0))
        assert abs(sd - 1.3) <= 1e-12

    def test_monotone_and_bounded(self):
        A = RNG.standard_normal((12, 5))
        L = first_difference(5)
        values = [
            statistical_dimension(A, SplineSpec(L, lam))
            for lam in (0.0, 0.1, 1.0, 10.0, 1e4)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert all(1.0 - 1e-9 <= v <= 5.0 + 1e-9 for v in values)

    def test_rank_deficient_L_rejected(self):
        A = RNG.standard_normal((8, 3))
        L = np.vstack([np.ones(3), np.ones(3)])
        with pytest.raises(RegularizationError):
            statistical_dimension(A, SplineSpec(L, 1.0))

    def test_stacked_rank_deficiency_rejected(self):
        A = np.zeros((4, 3))
        L = first_difference(3)  # rank 2, stacked rank 2 < 3
        with pytest.raises(RegularizationError):
            statistical_dimension(A, SplineSpec(L, 1.0))

    @pytest.mark.parametrize("n,d,p", [(6, 4, 2), (3, 3, 1), (3, 3, 2), (5, 3, 3)])
    def test_matches_gsvd_reference(self, n, d, p):
        # independent oracle: QR of the stack, then a CS decomposition of
        # the penalty block gives gamma^2 = (1 - mu^2) / mu^2
        for trial in range(10):
            rng = np.random.default_rng(60 + trial)
            A = rng.standard_normal((n, d))
            L = rng.standard_normal((p, d))
            lam = float(rng.uniform(0.1, 5.0))
            Q, _ = np.linalg.qr(np.vstack([A, L]))
            mu = np.linalg.svd(Q[n:], compute_uv=False)
            gamma_sq = np.sort((1.0 - mu**2) / mu**2)[::-1]
            expected = np.sum(gamma_sq / (gamma_sq + lam)) + d - p
            got = statistical_dimension(A, SplineSpec(L, lam))
            assert abs(got - expected) <= 1e-8


class TestLowRank:
    def test_exact_when_already_low_rank(self):
        rng = np.random.default_rng(71)
        # rank-1 factors make the product rank 1
        factors = [np.outer(rng.standard_normal(6), rng.standard_normal(3)) for _ in range(2)]
        tree = TensorTree(factors, TreeConfig(m=40, seed=71))
        C = materialize_lowrank(lowrank_query(tree, 1))
        A = kron_chain(factors)
        assert np.linalg.norm(C - A) <= 1e-6 * np.linalg.norm(A)

    def test_full_rank_projection_is_identity(self):
        factors = [RNG.standard_normal((8, 3)) for _ in range(2)]
        tree = TensorTree(factors, TreeConfig(m=60, seed=72))
        result = lowrank_query(tree, 9)
        assert np.allclose(result.Uk @ result.Uk.T, np.eye(9), atol=1e-10)
        C = materialize_lowrank(result)
        A = kron_chain(factors)
        assert np.allclose(C, A, atol=1e-8 * max(1.0, np.abs(A).max()))

    def test_rank_out_of_range(self):
        tree = TensorTree([np.eye(3)], TreeConfig(m=6, seed=73))
        with pytest.raises(ValueError):
            lowrank_query(tree, 4)
        with pytest.raises(ValueError):
            lowrank_query(tree, 0)

    def test_error_monotone_in_k(self):
        factors = [RNG.standard_normal((7, 3)) for _ in range(2)]
        tree = TensorTree(factors, TreeConfig(m=80, seed=74))
        A = kron_chain(factors)
        errs = [
            np.linalg.norm(materialize_lowrank(lowrank_query(tree, k)) - A)
            for k in range(1, 10)
        ]
        assert all(a >= b - 1e-9 for a, b in zip(errs, errs[1:]))

    def test_projection_rank(self):
        factors = [RNG.standard_normal((8, 3)) for _ in range(2)]
        tree = TensorTree(factors, TreeConfig(m=60, seed=75))
        C = materialize_lowrank(lowrank_query(tree, 2))
        _, s, _ = thin_svd(C)
        assert s[2] <= 1e-8 * s[0]

    def test_materialize_two_evaluation_orders(self):
        factors = [RNG.standard_normal((5, 2)) for _ in range(2)]
        tree = TensorTree(factors, TreeConfig(m=30, seed=76))
        res = lowrank_query(tree, 2)
        direct = kron_chain(res.factors) @ (res.Uk.T @ res.Uk)
        assert np.allclose(materialize_lowrank(res), direct, atol=1e-10)

    def test_unit_row_projection(self):
        factors = [np.eye(2), np.eye(2)]
        tree = TensorTree(factors, TreeConfig(m=16, seed=77))
        res = lowrank_query(tree, 1)
        forced = type(res)(res.factors, np.eye(4)[:1])
        C = materialize_lowrank(forced)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.allclose(C, expected, atol=1e-12)

    def test_oracle_ratio_smoke(self):
        hits = 0
        for trial in range(20):
            rng = np.random.default_rng(2500 + trial)
            factors = [rng.standard_normal((8, 3)) for _ in range(2)]
            tree = TensorTree(factors, TreeConfig(m=150, seed=5000 + trial))
            C = materialize_lowrank(lowrank_query(tree, 2))
            A = kron_chain(factors)
            hits += np.linalg.norm(C - A) <= 1.5 * exact_lowrank(factors, 2)
        assert hits >= 18
