"""
Bellman residual and its Riemannian gradient
============================================

A GMM-QF is ``Q(z) = sum_k xi_k exp(-(z - m_k)^T C_k^{-1} (z - m_k))``.
Given transitions ``(z_t, g_t, z'_t)`` the training loss is the squared
Bellman residual ``sum_t (g_t + alpha Q(z'_t) - Q(z_t))^2``.
"""

import numpy as np

from gmmqf import Dataset, GmmParams, loss, loss_and_gradient
from gmmqf.gradcheck import check_gradients

rng = np.random.default_rng(1)
params = GmmParams(
    weights=[1.0, -0.5],
    means=[[0.2, -0.3], [-0.4, 0.5]],
    covs=[0.5 * np.eye(2), [[0.4, 0.1], [0.1, 0.3]]],
)
z = rng.uniform(-1, 1, (8, 2))
data = Dataset(g=rng.uniform(0, 1, 8), z=z, z_next=z + 0.2 * rng.standard_normal((8, 2)))

# %%
lg = loss_and_gradient(params, data, alpha=0.9)
print("loss:", lg.value, "(same as loss():", loss(params, data, 0.9), ")")
print("weight gradient:", lg.grad.theta)
print("covariance gradient of component 0:\n", lg.grad.gamma[0])

# %%
# Finite differences agree with the closed form. Covariance blocks are
# compared through the metric pairing with random symmetric directions.
print(check_gradients(params, data, 0.9, rng))
