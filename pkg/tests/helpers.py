import numpy as np

from gmmqf.bellman import Dataset
from gmmqf.manifold import GmmParams, TangentVector


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, cond, n) if n > 1 else np.ones(1)
    rng.shuffle(lam)
    return (Q * lam) @ Q.T


def random_sym(rng, n, scale=1.0):
    A = scale * rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def random_params(rng, K, D, weight_scale=1.0):
    covs = np.stack([random_spd(rng, D, cond=3.0) * rng.uniform(0.3, 1.0) for _ in range(K)])
    return GmmParams(
        weight_scale * rng.standard_normal(K), rng.uniform(-1, 1, (K, D)), covs
    )


def random_tangent(rng, K, D):
    return TangentVector(
        rng.standard_normal(K),
        rng.standard_normal((K, D)),
        np.stack([random_sym(rng, D) for _ in range(K)]),
    )


def random_dataset(rng, T, D):
    z = rng.uniform(-1, 1, (T, D))
    return Dataset(g=rng.uniform(0, 1, T), z=z, z_next=z + 0.3 * rng.standard_normal((T, D)))

