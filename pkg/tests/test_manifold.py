import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_params, random_spd, random_sym, random_tangent
from gmmqf.errors import NotSPDError, ShapeError, StepTooLargeError
from gmmqf.manifold import (
    GmmParams,
    TangentVector,
    as_spd,
    bw_exp,
    bw_inner,
    lyapunov_solve,
    product_inner,
    retract,
)


class TestLyapunov:
    def test_identity_halves(self, rng):
        G = random_sym(rng, 4)
        np.testing.assert_allclose(lyapunov_solve(np.eye(4), G), G / 2, atol=1e-15)

    def test_diagonal(self):
        L = lyapunov_solve(np.diag([1.0, 3.0]), np.diag([4.0, 12.0]))
        np.testing.assert_allclose(L, np.diag([2.0, 2.0]), atol=1e-14)

    def test_residual_random(self, rng):
        C, G = random_spd(rng, 4), random_sym(rng, 4)
        L = lyapunov_solve(C, G)
        assert np.max(np.abs(C @ L + L @ C - G)) < 1e-10
        np.testing.assert_array_equal(L, L.T)

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    @pytest.mark.parametrize("cond", [1e2, 1e4, 1e6])
    def test_residual_ill_conditioned(self, rng, n, cond):
        # unit spectral norms: the attainable residual scales like eps * cond * |G|
        for _ in range(10):
            C = random_spd(rng, n, cond) / cond
            G = random_sym(rng, n)
            G /= np.linalg.norm(G, 2)
            L = lyapunov_solve(C, G)
            assert np.max(np.abs(C @ L + L @ C - G)) < 1e-10

    def test_batched_matches_loop(self, rng):
        C = np.stack([random_spd(rng, 3) for _ in range(4)])
        G = np.stack([random_sym(rng, 3) for _ in range(4)])
        batch = lyapunov_solve(C, G)
        for k in range(4):
            np.testing.assert_allclose(batch[k], lyapunov_solve(C[k], G[k]), atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            lyapunov_solve(np.eye(3), np.eye(2))


class TestBWInner:
    def test_identity(self, rng):
        G = random_sym(rng, 3)
        assert bw_inner(np.eye(3), G, G) == pytest.approx(0.25 * np.trace(G @ G), rel=1e-13)

    def test_orthogonal_supports(self):
        assert bw_inner(np.eye(2), np.diag([2.0, 0.0]), np.diag([0.0, 2.0])) == 0.0

    def test_symmetric(self, rng):
        C, G1, G2 = random_spd(rng, 3), random_sym(rng, 3), random_sym(rng, 3)
        assert abs(bw_inner(C, G1, G2) - bw_inner(C, G2, G1)) < 1e-12

    def test_bilinear(self, rng):
        C = random_spd(rng, 4)
        G1, G2, H = (random_sym(rng, 4) for _ in range(3))
        a, b = rng.standard_normal(2)
        lhs = bw_inner(C, a * G1 + b * G2, H)
        rhs = a * bw_inner(C, G1, H) + b * bw_inner(C, G2, H)
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_positive_definite(self, seed, n):
        r = np.random.default_rng(seed)
        C, G = random_spd(r, n, 1e3), random_sym(r, n)
        assert bw_inner(C, G, G) > 0


class TestProductInner:
    def test_zero(self, rng):
        p = random_params(rng, 2, 3)
        Z = TangentVector.zeros_like(p)
        assert product_inner(p, Z, Z) == 0.0

    def test_euclidean_only(self):
        p = GmmParams(np.zeros(2), np.zeros((2, 3)), np.stack([np.eye(3)] * 2))
        U = TangentVector(np.ones(2), np.zeros((2, 3)), np.zeros((2, 3, 3)))
        assert product_inner(p, U, U) == 2.0

    def test_block_decomposition(self, rng):
        p = random_params(rng, 2, 3)
        U1, U2 = random_tangent(rng, 2, 3), random_tangent(rng, 2, 3)
        expected = (
            U1.theta @ U2.theta
            + sum(U1.mu[k] @ U2.mu[k] for k in range(2))
            + sum(bw_inner(p.covs[k], U1.gamma[k], U2.gamma[k]) for k in range(2))
        )
        assert product_inner(p, U1, U2) == pytest.approx(expected, rel=1e-13)

    def test_reduces_to_dot_when_gamma_zero(self, rng):
        p = random_params(rng, 3, 2)
        U1, U2 = random_tangent(rng, 3, 2), random_tangent(rng, 3, 2)
        U1 = TangentVector(U1.theta, U1.mu, np.zeros_like(U1.gamma))
        expected = U1.theta @ U2.theta + np.sum(U1.mu * U2.mu)
        assert product_inner(p, U1, U2) == pytest.approx(expected, rel=1e-14)

    def test_shape_mismatch(self, rng):
        p = random_params(rng, 2, 3)
        with pytest.raises(ShapeError):
            product_inner(p, random_tangent(rng, 2, 2), random_tangent(rng, 2, 2))


class TestBWExp:
    def test_zero_is_identity_exactly(self, rng):
        C = random_spd(rng, 3)
        np.testing.assert_array_equal(bw_exp(C, np.zeros((3, 3))), C)

    def test_identity_base(self, rng):
        G = random_sym(rng, 3, 0.3)
        np.testing.assert_allclose(bw_exp(np.eye(3), G), np.eye(3) + G + G @ G / 4, atol=1e-14)

    def test_second_order_error_decay(self):
        C = np.eye(2)
        G = np.diag([1.0, 0.0])
        errs = []
        for t in (1e-2, 5e-3):
            errs.append(np.linalg.norm(bw_exp(C, t * G) - C - t * G))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_derivative_at_zero(self, rng):
        C, G = random_spd(rng, 3), random_sym(rng, 3)
        t = 1e-7
        slope = (bw_exp(C, t * G) - C) / t
        np.testing.assert_allclose(slope, G, rtol=1e-6, atol=1e-6 * np.max(np.abs(G)))

    def test_output_spd_and_symmetric(self, rng):
        for _ in range(20):
            C, G = random_spd(rng, 4), random_sym(rng, 4, 0.5)
            E = bw_exp(C, G)
            np.testing.assert_array_equal(E, E.T)
            as_spd(E)

    def test_leaving_cone_signals(self):
        C = np.eye(2)
        G = np.diag([-2.0, 0.0])  # first eigenvalue 1 - 2 + 1 = 0
        with pytest.raises(StepTooLargeError):
            bw_exp(C, G)


class TestRetract:
    def test_zero_step(self, rng):
        p = random_params(rng, 2, 3)
        q = retract(p, 1.0, TangentVector.zeros_like(p))
        np.testing.assert_array_equal(q.weights, p.weights)
        np.testing.assert_array_equal(q.means, p.means)
        np.testing.assert_array_equal(q.covs, p.covs)

    def test_scalar_translation(self):
        p = GmmParams([0.0], [[0.0]], [[[1.0]]])
        U = TangentVector([2.0], [[4.0]], [[[0.0]]])
        q = retract(p, 0.5, U)
        assert q.weights[0] == 1.0
        assert q.means[0, 0] == 2.0
        assert q.covs[0, 0, 0] == 1.0

    def test_covariance_blocks(self, rng):
        p = random_params(rng, 3, 2)
        U = random_tangent(rng, 3, 2)
        q = retract(p, 0.1, U)
        for k in range(3):
            np.testing.assert_allclose(q.covs[k], bw_exp(p.covs[k], 0.1 * U.gamma[k]))


class TestTypes:
    def test_rejects_non_spd(self):
        with pytest.raises(NotSPDError):
            GmmParams([1.0], [[0.0, 0.0]], [np.diag([1.0, -1.0])])

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSPDError):
            as_spd(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_rejects_inconsistent_shapes(self):
        with pytest.raises(ShapeError):
            GmmParams([1.0, 2.0], [[0.0, 0.0]], [np.eye(2)])

    def test_immutable(self, rng):
        p = random_params(rng, 2, 2)
        with pytest.raises(ValueError):
            p.weights[0] = 3.0

    def test_precisions(self, rng):
        p = random_params(rng, 3, 3)
        for k in range(3):
            np.testing.assert_allclose(p.precisions[k] @ p.covs[k], np.eye(3), atol=1e-12)
