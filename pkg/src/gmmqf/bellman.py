"""Empirical Bellman-residual loss and its Riemannian gradient.

For a dataset ``{(s_t, a_t, g_t, s'_t)}`` with embeddings ``z_t = (s_t, a_t)``
and ``z'_t = (s'_t, mu(s'_t))``::

    L(Omega) = sum_t [g_t + alpha Q(z'_t) - Q(z_t)]^2 = ||g + Delta xi||^2
    Delta[t, k] = alpha G(z'_t | m_k, C_k) - G(z_t | m_k, C_k)

The covariance block of the gradient is the Riemannian gradient under the
Bures-Wasserstein metric, not the Euclidean matrix derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeError
from .gmm import kernel_values_from_features, quad_features
from .manifold import TangentVector, sym


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: float
    g: float
    s_next: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """Batch of transitions with their state-action embeddings.

    ``z_next`` depends on the policy being evaluated; rebuild it with
    :meth:`with_next_embedding` when the policy changes. The raw
    ``s``/``a``/``s_next`` arrays are optional so that synthetic instances
    can be built directly from embeddings.
    """

    g: np.ndarray
    z: np.ndarray
    z_next: np.ndarray
    s: np.ndarray | None = None
    a: np.ndarray | None = None
    s_next: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).reshape(-1)
        z = np.atleast_2d(np.asarray(self.z, dtype=float))
        zn = np.atleast_2d(np.asarray(self.z_next, dtype=float))
        if g.size < 1:
            raise ShapeError("dataset must hold at least one transition")
        if z.shape != zn.shape or z.shape[0] != g.size:
            raise ShapeError(
                f"inconsistent dataset shapes g{g.shape}, z{z.shape}, z_next{zn.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError("one-step losses must be finite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "z_next", zn)

    def __len__(self):
        return self.g.size

    @cached_property
    def _features(self):
        # quadratic features of z stacked over those of z'
        return quad_features(np.vstack([self.z, self.z_next]))

    @cached_property
    def _outer(self):
        T, Dz = self.z.shape
        F = self._features[:, : Dz * Dz]
        return F[:T], F[T:]

    @property
    def transitions(self):
        if self.s is None:
            raise ValueError("dataset was built without raw transitions")
        return [
            Transition(self.s[t], float(self.a[t]), float(self.g[t]), self.s_next[t])
            for t in range(len(self))
        ]

    def with_next_embedding(self, z_next):
        return Dataset(self.g, self.z, z_next, self.s, self.a, self.s_next)


@dataclass(frozen=True, eq=False)
class LossGradient:
    value: float
    grad: TangentVector


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"discount must lie in [0, 1], got {alpha}")


def _terms(params, data, alpha):
    _check_alpha(alpha)
    T = len(data)
    both = kernel_values_from_features(params, data._features)
    G, Gn = both[:T], both[T:]
    delta = alpha * Gn - G
    resid = data.g + delta @ params.weights
    return G, Gn, delta, resid


def delta_matrix(params, data, alpha):
    """The T x K matrix ``alpha G(z'_t|k) - G(z_t|k)``."""
    return _terms(params, data, alpha)[2]


def residuals(params, data, alpha):
    """Per-sample Bellman residuals ``g_t + alpha Q(z'_t) - Q(z_t)``."""
    return _terms(params, data, alpha)[3]


def loss(params, data, alpha):
    r = residuals(params, data, alpha)
    return float(r @ r)


def _grad_xi(delta, resid):
    return 2.0 * delta.T @ resid


def _sample_weights(params, alpha, G, Gn, resid):
    # w[t, k] = 4 delta_t xi_k, split over the z' and z kernels
    w = 4.0 * resid[:, None] * params.weights[None, :]
    return alpha * w * Gn, w * G


def _first_moment(W, Z, m):
    """``sum_t W[t, k] (z_t - m_k)`` for each k."""
    return W.T @ Z - W.sum(axis=0)[:, None] * m


def _second_moment(W, Z, outer, m):
    """``sum_t W[t, k] (z_t - m_k)(z_t - m_k)^T`` for each k."""
    K, Dz = m.shape
    s1 = (W.T @ Z)[:, :, None] * m[:, None, :]
    w0 = W.sum(axis=0)[:, None, None]
    return (W.T @ outer).reshape(K, Dz, Dz) - s1 - s1.transpose(0, 2, 1) + w0 * (m[:, :, None] * m[:, None, :])


def _grad_means(params, data, Wn, W):
    m = params.means
    v = _first_moment(Wn, data.z_next, m) - _first_moment(W, data.z, m)
    return np.einsum("kde,ke->kd", params.precisions, v)


def _grad_covs(params, data, Wn, W):
    m = params.means
    outer, outer_next = data._outer
    # S_k = sum_t 4 delta_t xi_k B_tk
    S = _second_moment(Wn, data.z_next, outer_next, m) - _second_moment(W, data.z, outer, m)
    P = params.precisions
    return sym(P @ S + S @ P)


def grad_xi(params, data, alpha):
    _, _, delta, resid = _terms(params, data, alpha)
    return _grad_xi(delta, resid)


def grad_means(params, data, alpha):
    G, Gn, _, resid = _terms(params, data, alpha)
    return _grad_means(params, data, *_sample_weights(params, alpha, G, Gn, resid))


def grad_covs(params, data, alpha):
    G, Gn, _, resid = _terms(params, data, alpha)
    return _grad_covs(params, data, *_sample_weights(params, alpha, G, Gn, resid))


def loss_and_gradient(params, data, alpha):
    """Loss value and full Riemannian gradient from one kernel pass."""
    G, Gn, delta, resid = _terms(params, data, alpha)
    Wn, W = _sample_weights(params, alpha, G, Gn, resid)
    grad = TangentVector(
        _grad_xi(delta, resid),
        _grad_means(params, data, Wn, W),
        _grad_covs(params, data, Wn, W),
    )
    return LossGradient(float(resid @ resid), grad)
