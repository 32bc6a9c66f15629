"""Finite-difference checks of the closed-form gradients.

Only :func:`gmmqf.bellman.loss` is differentiated numerically; the analytic
side comes from :func:`gmmqf.bellman.loss_and_gradient`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bellman import Dataset, loss, loss_and_gradient
from .manifold import GmmParams, bw_inner, sym


@dataclass(frozen=True)
class GradCheckResult:
    xi: float
    means: float
    covs: float

    @property
    def worst(self):
        return max(self.xi, self.means, self.covs)


def random_instance(rng, max_components=3, max_dim=4, max_samples=10):
    """Random parameters and dataset with K, Dz, T drawn up to the given caps."""
    K = int(rng.integers(1, max_components + 1))
    D = int(rng.integers(1, max_dim + 1))
    T = int(rng.integers(1, max_samples + 1))
    covs = []
    for _ in range(K):
        A = rng.standard_normal((D, D))
        covs.append(A @ A.T / D + rng.uniform(0.3, 1.0) * np.eye(D))
    params = GmmParams(rng.standard_normal(K), rng.uniform(-1, 1, (K, D)), np.stack(covs))
    z = rng.uniform(-1, 1, (T, D))
    data = Dataset(g=rng.uniform(0, 1, T), z=z, z_next=z + 0.3 * rng.standard_normal((T, D)))
    alpha = float(rng.uniform(0.5, 0.99))
    return params, data, alpha


def fd_grad_xi(params, data, alpha, h=1e-6):
    out = np.empty(params.n_components)
    for k in range(params.n_components):
        e = np.zeros(params.n_components)
        e[k] = h
        out[k] = (
            loss(params.replace(weights=params.weights + e), data, alpha)
            - loss(params.replace(weights=params.weights - e), data, alpha)
        ) / (2 * h)
    return out


def fd_grad_means(params, data, alpha, h=1e-6):
    out = np.empty_like(params.means)
    for k in range(params.n_components):
        for d in range(params.dim):
            e = np.zeros_like(params.means)
            e[k, d] = h
            out[k, d] = (
                loss(params.replace(means=params.means + e), data, alpha)
                - loss(params.replace(means=params.means - e), data, alpha)
            ) / (2 * h)
    return out


def _central_cov(params, data, alpha, k, direction, h):
    E = np.zeros_like(params.covs)
    E[k] = direction
    return (
        loss(params.replace(covs=params.covs + h * E), data, alpha)
        - loss(params.replace(covs=params.covs - h * E), data, alpha)
    ) / (2 * h)


def fd_directional_cov(params, data, alpha, k, direction, h=1e-3):
    """Derivative of ``t -> L(C_k + t * direction)`` at ``t = 0``.

    Richardson-extrapolated central differences (steps ``h`` and ``h/2``),
    so truncation error is O(h^4) and the step can stay large enough to keep
    cancellation error small.
    """
    coarse = _central_cov(params, data, alpha, k, direction, h)
    fine = _central_cov(params, data, alpha, k, direction, h / 2)
    return (4.0 * fine - coarse) / 3.0


def _rel(a, b, scale=None):
    denom = max(np.max(np.abs(b)) if scale is None else scale, 1e-300)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / denom)


def check_gradients(params, data, alpha, rng, n_directions=20, h=1e-6, h_cov=1e-3):
    """Largest relative error per gradient block.

    Weight and mean blocks compare entrywise against central differences,
    normalized by the largest analytic entry. For covariances, the BW pairing
    ``<grad_k, Gamma>_{C_k}`` is compared with the directional derivative
    along random symmetric ``Gamma``, normalized by
    ``|grad_k|_{C_k} |Gamma|_{C_k}``.
    """
    grad = loss_and_gradient(params, data, alpha).grad
    err_xi = _rel(fd_grad_xi(params, data, alpha, h), grad.theta)
    err_m = _rel(fd_grad_means(params, data, alpha, h), grad.mu)
    err_c = 0.0
    for k in range(params.n_components):
        C, Gk = params.covs[k], grad.gamma[k]
        gnorm = np.sqrt(bw_inner(C, Gk, Gk))
        for _ in range(n_directions):
            Gamma = sym(rng.standard_normal(C.shape))
            analytic = bw_inner(C, Gk, Gamma)
            numeric = fd_directional_cov(params, data, alpha, k, Gamma, h_cov)
            scale = gnorm * np.sqrt(bw_inner(C, Gamma, Gamma))
            err_c = max(err_c, _rel(numeric, analytic, scale))
    return GradCheckResult(err_xi, err_m, err_c)


def run_suite(seed, n_instances=50, **caps):
    """Check ``n_instances`` random instances; returns the per-block maxima."""
    rng = np.random.default_rng(seed)
    worst = GradCheckResult(0.0, 0.0, 0.0)
    for _ in range(n_instances):
        r = check_gradients(*random_instance(rng, **caps), rng)
        worst = GradCheckResult(
            max(worst.xi, r.xi), max(worst.means, r.means), max(worst.covs, r.covs)
        )
    return worst
