import numpy as np
import pytest

from helpers import random_dataset, random_params
from gmmqf.bellman import Dataset, loss, loss_and_gradient
from gmmqf.manifold import GmmParams
from gmmqf.optim import ArmijoConfig, armijo_search, optimize


def scalar_quadratic(xi):
    # one kernel evaluated at its mean with alpha = 0: L(xi) = xi^2
    p = GmmParams([xi], [[0.0]], [[[1.0]]])
    data = Dataset(g=[0.0], z=[[0.0]], z_next=[[3.0]])
    return p, data


def test_scalar_quadratic_is_xi_squared():
    p, data = scalar_quadratic(1.5)
    lg = loss_and_gradient(p, data, 0.0)
    assert lg.value == 2.25
    assert lg.grad.theta[0] == 3.0
    assert lg.grad.mu[0, 0] == 0.0 and lg.grad.gamma[0, 0, 0] == 0.0


def test_scalar_quadratic_armijo_sides():
    xi, cfg = 1.5, ArmijoConfig(alpha_bar=1.0, beta=0.5, sigma=0.1)
    p, data = scalar_quadratic(xi)
    lg = loss_and_gradient(p, data, 0.0)
    step, nxt, nloss = armijo_search(p, lg.grad, lg.value, data, 0.0, cfg)
    # first trial t = 0.5 lands on xi - 0.5 * 2 xi = 0
    assert step == 0.5
    decrease = xi**2 - (xi - step * 2 * xi) ** 2
    required = cfg.sigma * step * (2 * xi) ** 2
    assert decrease >= required
    assert lg.value - nloss == pytest.approx(decrease, rel=1e-15)
    assert nxt.weights[0] == pytest.approx(0.0, abs=1e-15)


def test_backtracks_when_first_trial_overshoots():
    # alpha_bar = 4: t = 2 overshoots to xi' = -3 xi, t = 1 to -xi (no decrease), t = 0.5 succeeds
    p, data = scalar_quadratic(1.0)
    lg = loss_and_gradient(p, data, 0.0)
    step, _, _ = armijo_search(p, lg.grad, lg.value, data, 0.0, ArmijoConfig(alpha_bar=4.0))
    assert step == 0.5


def test_zero_gradient_returns_first_trial():
    p, data = scalar_quadratic(0.0)
    lg = loss_and_gradient(p, data, 0.0)
    cfg = ArmijoConfig(alpha_bar=2.0, beta=0.25)
    step, nxt, nloss = armijo_search(p, lg.grad, lg.value, data, 0.0, cfg)
    assert step == 0.5
    assert nloss == 0.0
    np.testing.assert_array_equal(nxt.weights, p.weights)
    np.testing.assert_array_equal(nxt.covs, p.covs)


def test_ascent_direction_stalls():
    p, data = scalar_quadratic(1.0)
    lg = loss_and_gradient(p, data, 0.0)
    step, nxt, nloss = armijo_search(p, -lg.grad, lg.value, data, 0.0, ArmijoConfig())
    assert step == 0.0 and nxt is p and nloss == lg.value


def test_plain_descent_limit():
    # tiny fixed step, sigma -> 0: one Armijo step equals xi - t * grad
    t = 2.0**-20
    p, data = scalar_quadratic(0.7)
    cfg = ArmijoConfig(alpha_bar=2 * t, beta=0.5, sigma=1e-12)
    lg = loss_and_gradient(p, data, 0.0)
    step, nxt, _ = armijo_search(p, lg.grad, lg.value, data, 0.0, cfg)
    assert step == t
    assert nxt.weights[0] == 0.7 - t * 1.4


def test_zero_steps_returns_start(rng):
    p, data = random_params(rng, 2, 3), random_dataset(rng, 10, 3)
    assert optimize(p, data, 0.9, ArmijoConfig(n_steps=0)) is p


def test_already_optimal_start(rng):
    z = rng.uniform(-1, 1, (10, 3))
    data = Dataset(g=np.zeros(10), z=z, z_next=z[::-1])
    p = random_params(rng, 2, 3, weight_scale=0.0)
    trace = []
    assert optimize(p, data, 0.9, ArmijoConfig(), trace) is p
    assert trace == []


def test_monotone_descent(rng):
    for _ in range(5):
        p, data = random_params(rng, 2, 3), random_dataset(rng, 20, 3)
        trace = []
        out = optimize(p, data, 0.9, ArmijoConfig(n_steps=50), trace)
        losses = [loss(p, data, 0.9)] + [r.loss for r in trace]
        for prev, cur, rec in zip(losses, losses[1:], trace):
            if rec.step > 0:
                assert cur < prev
            else:
                assert cur == prev
        assert loss(out, data, 0.9) == losses[-1]
        assert np.all(np.linalg.eigvalsh(out.covs) > 1e-10)


def test_deterministic(rng):
    p, data = random_params(rng, 3, 3), random_dataset(rng, 15, 3)
    a = optimize(p, data, 0.8, ArmijoConfig(n_steps=30))
    b = optimize(p, data, 0.8, ArmijoConfig(n_steps=30))
    for f in ("weights", "means", "covs"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha_bar=0.0), dict(beta=1.0), dict(beta=0.0), dict(sigma=1.0), dict(n_steps=-1),
     dict(max_backtracks=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ArmijoConfig(**kwargs)
