"""
Bures-Wasserstein geometry of covariance matrices
=================================================

Covariances live on the SPD cone. Their tangent vectors are symmetric
matrices, and the metric at ``C`` pairs two of them through the Lyapunov
operator: ``<G1, G2>_C = 1/2 tr(L_C(G1) G2)`` with ``C L + L C = G1``.
"""

import numpy as np

from gmmqf import bw_exp, bw_inner, lyapunov_solve

rng = np.random.default_rng(0)
A = rng.standard_normal((3, 3))
C = A @ A.T + 0.5 * np.eye(3)
G = 0.5 * (lambda B: B + B.T)(rng.standard_normal((3, 3)))

# %%
# The Lyapunov solve goes through one eigendecomposition of C.
L = lyapunov_solve(C, G)
print("Lyapunov residual:", np.abs(C @ L + L @ C - G).max())

# %%
# At the identity the metric is a quarter of the Frobenius product.
print("<G, G>_I =", bw_inner(np.eye(3), G, G), " tr(G G)/4 =", np.trace(G @ G) / 4)

# %%
# The exponential map ``C + G + L G L`` (``L = L_C(G)``) agrees with the
# straight line to first order; the gap shrinks by 4 each time t halves.
for t in (0.1, 0.05, 0.025):
    gap = np.linalg.norm(bw_exp(C, t * G) - (C + t * G))
    print(f"t={t:<6} |exp(C, tG) - (C + tG)| = {gap:.3e}")

# %%
# Too long a step leaves the cone; the optimizer treats that as a failed trial.
from gmmqf import StepTooLargeError

try:
    bw_exp(np.eye(2), np.diag([-4.0, 0.0]))
except StepTooLargeError as exc:
    print("rejected:", exc)
