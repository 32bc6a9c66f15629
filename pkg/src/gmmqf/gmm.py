"""GMM Q-functions: weighted sums of unnormalized Gaussian kernels.

``Q(z) = sum_k xi_k exp(-(z - m_k)^T C_k^{-1} (z - m_k))``

There is no normalization constant and no factor 1/2 in the exponent; the
mixture models a loss surface, not a density.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def gaussian_kernel(z, m, C):
    """``exp(-d^T C^{-1} d)`` with ``d = z - m``, for a single kernel."""
    z = np.asarray(z, dtype=float)
    m = np.asarray(m, dtype=float)
    C = np.asarray(C, dtype=float)
    if z.shape != m.shape or C.shape != (z.size, z.size):
        raise ShapeError(f"incompatible shapes z{z.shape}, m{m.shape}, C{C.shape}")
    d = z - m
    return float(np.exp(-d @ np.linalg.solve(C, d)))


def kernel_matrix(params, Z):
    """Kernel values for a batch of inputs.

    Parameters
    ----------
    params : GmmParams
    Z : ndarray, shape (N, Dz)

    Returns
    -------
    G : ndarray, shape (N, K)
        ``G[t, k] = gaussian_kernel(Z[t], m_k, C_k)``.
    D : ndarray, shape (N, K, Dz)
        Differences ``Z[t] - m_k``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != params.dim:
        raise ShapeError(f"inputs must have shape (N, {params.dim}), got {Z.shape}")
    D = Z[:, None, :] - params.means[None, :, :]
    return kernel_values(params, Z), D


def quad_features(Z):
    """Rows ``[vec(z z^T), z, 1]``, shape (N, Dz * Dz + Dz + 1).

    Every quadratic form ``(z - m)^T P (z - m)`` is linear in these features,
    so kernel values for a fixed batch reduce to one matrix product.
    """
    Z = np.asarray(Z, dtype=float)
    N, Dz = Z.shape
    outer = (Z[:, :, None] * Z[:, None, :]).reshape(N, Dz * Dz)
    return np.hstack([outer, Z, np.ones((N, 1))])


def _quad_coefficients(params):
    # (z - m)^T P (z - m) = vec(P) . vec(z z^T) - 2 (P m) . z + m^T P m
    P = params.precisions
    Pm = np.einsum("kij,kj->ki", P, params.means)
    K, Dz = params.means.shape
    return np.vstack([P.reshape(K, Dz * Dz).T, -2.0 * Pm.T, np.einsum("ki,ki->k", Pm, params.means)[None]])


def kernel_values(params, Z):
    """``G`` of :func:`kernel_matrix` without the difference array."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != params.dim:
        raise ShapeError(f"inputs must have shape (N, {params.dim}), got {Z.shape}")
    return kernel_values_from_features(params, quad_features(Z))


def kernel_values_from_features(params, F):
    """Kernel values from precomputed :func:`quad_features` rows."""
    if F.shape[1] != params.dim * (params.dim + 1) + 1:
        raise ShapeError(f"features do not match input dimension {params.dim}")
    quad = F @ _quad_coefficients(params)
    np.maximum(quad, 0.0, out=quad)
    np.negative(quad, out=quad)
    return np.exp(quad, out=quad)


def q_values(params, Z):
    """Evaluate Q at each row of ``Z``; returns shape (N,)."""
    return kernel_values(params, np.atleast_2d(Z)) @ params.weights


def q_eval(params, z):
    z = np.asarray(z, dtype=float)
    if z.shape != (params.dim,):
        raise ShapeError(f"z must have shape ({params.dim},), got {z.shape}")
    return float(q_values(params, z[None, :])[0])


def q_greedy_action(params, s, actions, embed):
    """Loss-minimizing action at state ``s``.

    ``embed(s, a)`` maps a state and an action to a vector of length Dz.
    Ties go to the earliest action in ``actions``.

    Returns
    -------
    (action, value)
    """
    actions = list(actions)
    if not actions:
        raise ValueError("empty action set")
    Z = np.stack([np.asarray(embed(s, a), dtype=float) for a in actions])
    q = q_values(params, Z)
    i = int(np.argmin(q))
    return actions[i], float(q[i])


def greedy_indices(params, states, actions, embed_batch):
    """Vectorized greedy choice over a batch of states.

    ``embed_batch(states, action_values)`` embeds row-aligned arrays.
    Returns the index (into ``actions``) of the minimizing action per state
    and the minimal Q values.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.asarray(actions, dtype=float)
    n, n_act = states.shape[0], actions.size
    S = np.repeat(states, n_act, axis=0)
    A = np.tile(actions, n)
    q = q_values(params, embed_batch(S, A)).reshape(n, n_act)
    idx = np.argmin(q, axis=1)
    return idx, q[np.arange(n), idx]
