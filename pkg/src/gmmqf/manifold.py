r"""Geometry of the GMM-QF parameter space.

The parameter space is the product

.. math::

    \mathcal{M} = \mathbb{R}^K \times \mathbb{R}^{D_z \times K}
    \times (\mathcal{S}_{++}^{D_z})^K

with the Euclidean metric on the weight and mean blocks and the
Bures-Wasserstein (BW) metric on each covariance block:

.. math::

    \langle \Gamma_1, \Gamma_2 \rangle_C = \tfrac12 \mathrm{tr}(L_C(\Gamma_1)\Gamma_2),
    \qquad C L_C(\Gamma) + L_C(\Gamma) C = \Gamma .

Matrix functions accept a single ``(n, n)`` matrix or a stack ``(..., n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotSPDError, NumericalError, ShapeError, StepTooLargeError

EPS_SPD = 1e-10
SYM_TOL = 1e-12


def sym(M):
    """Symmetric part ``(M + M^T) / 2`` of a matrix or stack of matrices."""
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _check_square(*mats):
    shape = mats[0].shape
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise ShapeError(f"expected square matrices, got shape {shape}")
    for M in mats[1:]:
        if M.shape != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {M.shape}")


def as_sym(G, tol=SYM_TOL):
    """Validate ``G`` as a symmetric (tangent) matrix and return it as floats."""
    G = np.asarray(G, dtype=float)
    _check_square(G)
    if np.max(np.abs(G - np.swapaxes(G, -1, -2)), initial=0.0) > tol:
        raise ShapeError("matrix is not symmetric")
    return G


def as_spd(C, eps_spd=EPS_SPD, tol=SYM_TOL):
    """Validate ``C`` as symmetric positive definite.

    Raises
    ------
    NotSPDError
        If ``C`` is not symmetric to ``tol`` or its smallest eigenvalue is
        not above ``eps_spd``.
    """
    C = np.asarray(C, dtype=float)
    _check_square(C)
    if np.max(np.abs(C - np.swapaxes(C, -1, -2)), initial=0.0) > tol:
        raise NotSPDError("matrix is not symmetric")
    if not np.all(np.isfinite(C)):
        raise NotSPDError("matrix has non-finite entries")
    if np.min(np.linalg.eigvalsh(C)) <= eps_spd:
        raise NotSPDError(f"minimum eigenvalue not above {eps_spd:g}")
    return C


def _eigh(C):
    try:
        return np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc


def lyapunov_solve(C, G):
    """Solve ``C L + L C = G`` for symmetric ``L``.

    Uses the eigendecomposition ``C = U diag(lam) U^T``; in that basis the
    solution is ``G~_ij / (lam_i + lam_j)``. One step of iterative
    refinement follows.
    """
    C = np.asarray(C, dtype=float)
    G = np.asarray(G, dtype=float)
    _check_square(C, G)
    lam, U = _eigh(C)
    Ut = np.swapaxes(U, -1, -2)
    denom = lam[..., :, None] + lam[..., None, :]
    L = sym(U @ ((Ut @ G @ U) / denom) @ Ut)
    # one refinement sweep; matters when cond(C) is large
    R = sym(G - (C @ L + L @ C))
    return sym(L + U @ ((Ut @ R @ U) / denom) @ Ut)


def bw_inner(C, G1, G2):
    """BW inner product ``1/2 tr(L_C(G1) G2)`` (vectorized over leading axes)."""
    G1 = np.asarray(G1, dtype=float)
    G2 = np.asarray(G2, dtype=float)
    _check_square(G1, G2)
    L = lyapunov_solve(C, G1)
    return 0.5 * np.einsum("...ij,...ji->...", L, G2)


def bw_exp(C, G, eps_spd=EPS_SPD):
    """BW exponential ``C + G + L_C(G) C L_C(G)``.

    Raises
    ------
    StepTooLargeError
        If the result is not SPD above ``eps_spd``.
    """
    C = np.asarray(C, dtype=float)
    G = np.asarray(G, dtype=float)
    _check_square(C, G)
    if not np.any(G):
        return C.copy()
    L = lyapunov_solve(C, G)
    out = sym(C + G + L @ C @ L)
    if not np.all(np.isfinite(out)):
        raise StepTooLargeError("retraction produced non-finite entries")
    if np.min(np.linalg.eigvalsh(out)) <= eps_spd:
        raise StepTooLargeError("retraction left the SPD cone")
    return out


@dataclass(frozen=True, eq=False)
class GmmParams:
    """A point ``(xi, m_1..m_K, C_1..C_K)`` of the parameter manifold.

    Attributes
    ----------
    weights : ndarray, shape (K,)
    means : ndarray, shape (K, Dz)
    covs : ndarray, shape (K, Dz, Dz)
        Each slice symmetric positive definite.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        m = np.array(self.means, dtype=float)
        c = np.array(self.covs, dtype=float)
        if w.size < 1:
            raise ShapeError("need at least one component")
        if m.ndim != 2 or m.shape[0] != w.size:
            raise ShapeError(f"means must have shape (K, Dz), got {m.shape}")
        if c.shape != (w.size, m.shape[1], m.shape[1]):
            raise ShapeError(f"covs must have shape (K, Dz, Dz), got {c.shape}")
        as_spd(c)
        for a in (w, m, c):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @cached_property
    def precisions(self):
        """Stack of inverse covariances, computed once per parameter point."""
        lam, U = _eigh(self.covs)
        return sym((U / lam[:, None, :]) @ np.swapaxes(U, -1, -2))

    def replace(self, weights=None, means=None, covs=None):
        return GmmParams(
            self.weights if weights is None else weights,
            self.means if means is None else means,
            self.covs if covs is None else covs,
        )


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector ``(theta, mu_1..mu_K, Gamma_1..Gamma_K)``."""

    theta: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).reshape(-1)
        mu = np.array(self.mu, dtype=float)
        ga = np.array(self.gamma, dtype=float)
        if mu.ndim != 2 or mu.shape[0] != th.size:
            raise ShapeError(f"mu must have shape (K, Dz), got {mu.shape}")
        if ga.shape != (th.size, mu.shape[1], mu.shape[1]):
            raise ShapeError(f"gamma must have shape (K, Dz, Dz), got {ga.shape}")
        as_sym(ga)
        for a in (th, mu, ga):
            a.flags.writeable = False
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", ga)

    @classmethod
    def zeros_like(cls, at):
        K, D = at.n_components, at.dim
        return cls(np.zeros(K), np.zeros((K, D)), np.zeros((K, D, D)))

    def __mul__(self, c):
        return TangentVector(c * self.theta, c * self.mu, c * self.gamma)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        return TangentVector(
            self.theta + other.theta, self.mu + other.mu, self.gamma + other.gamma
        )


def _check_compatible(at, *vecs):
    for U in vecs:
        if U.mu.shape != at.means.shape:
            raise ShapeError(
                f"tangent shape {U.mu.shape} incompatible with point {at.means.shape}"
            )


def product_inner(at, U1, U2):
    """Product-manifold inner product of two tangent vectors at ``at``."""
    _check_compatible(at, U1, U2)
    eucl = float(U1.theta @ U2.theta) + float(np.sum(U1.mu * U2.mu))
    return eucl + float(np.sum(bw_inner(at.covs, U1.gamma, U2.gamma)))


def tangent_norm(at, U):
    return float(np.sqrt(max(product_inner(at, U, U), 0.0)))


def retract(at, step, U, eps_spd=EPS_SPD):
    """Move from ``at`` along ``step * U``.

    Euclidean blocks are translated; covariances go through :func:`bw_exp`,
    whose :class:`StepTooLargeError` propagates.
    """
    _check_compatible(at, U)
    return GmmParams(
        at.weights + step * U.theta,
        at.means + step * U.mu,
        bw_exp(at.covs, step * U.gamma, eps_spd),
    )
