"""Deterministic pendulum swing-up and mountain-car simulators.

States are row vectors; every method accepts a single state of shape (D,)
or a batch of shape (N, D) with row-aligned actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bellman import Dataset

LOSS_VARIANTS = ("continuous", "discrete")


def _wrap_angle(theta):
    theta = np.asarray(theta, dtype=float)
    out = theta - 2.0 * np.pi * np.round(theta / (2.0 * np.pi))
    # keep values already inside [-pi, pi] bit-exact
    return np.where(np.abs(theta) <= np.pi, theta, out)


def _check_actions(env, a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isin(a, env.actions)):
        raise ValueError(f"action(s) {a} not in action set {env.actions}")
    return a


@dataclass(frozen=True)
class EnvModel:
    """Shared behavior: bounds, action set, affine embedding to [-1, 1]."""

    name = "base"
    actions: tuple = ()
    variant: str = "continuous"
    scale_inputs: bool = True
    state_low: tuple = ()
    state_high: tuple = ()
    # training episodes: a goal state is frozen (self-loop, zero loss)
    absorbing_goal = False
    # validation episodes: stop on goal entry
    stop_at_goal = False

    def __post_init__(self):
        if not self.actions:
            raise ValueError("action set must be non-empty")
        if self.variant not in LOSS_VARIANTS:
            raise ValueError(f"loss variant must be one of {LOSS_VARIANTS}")

    @property
    def state_dim(self):
        return len(self.state_low)

    @property
    def input_dim(self):
        return self.state_dim + 1

    def embed(self, s, a):
        """Concatenate state and action value, each mapped affinely to [-1, 1]."""
        s = np.asarray(s, dtype=float)
        a = np.asarray(a, dtype=float)
        if self.scale_inputs:
            lo = np.asarray(self.state_low)
            hi = np.asarray(self.state_high)
            s = 2.0 * (s - lo) / (hi - lo) - 1.0
            amin, amax = min(self.actions), max(self.actions)
            a = 2.0 * (a - amin) / (amax - amin) - 1.0
        return np.concatenate([s, a[..., None]], axis=-1)

    def clip_state(self, s):
        return np.clip(s, self.state_low, self.state_high)

    def in_bounds(self, s):
        s = np.asarray(s)
        return np.all((s >= self.state_low) & (s <= self.state_high), axis=-1)


@dataclass(frozen=True)
class Pendulum(EnvModel):
    """Torque-limited pendulum; ``theta = 0`` is upright.

    Semi-implicit Euler on
    ``theta'' = (-friction theta' + m g l sin(theta) + a) / (m l^2)``.
    """

    name = "pendulum"
    actions: tuple = (-5.0, -3.0, 0.0, 3.0, 5.0)
    state_low: tuple = (-np.pi, -4.0)
    state_high: tuple = (np.pi, 4.0)
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    friction: float = 0.01
    dt_seconds: float = 0.05
    theta_tol: float = 0.05
    init_exclusion: float = 0.3
    hold_band: float = 0.3
    hold_fraction: float = 0.2

    def step(self, s, a, dt=None):
        dt = self.dt_seconds if dt is None else dt
        s = np.asarray(s, dtype=float)
        a = _check_actions(self, a)
        theta, omega = s[..., 0], s[..., 1]
        ml2 = self.mass * self.length**2
        acc = (
            -self.friction * omega
            + self.mass * self.gravity * self.length * np.sin(theta)
            + a
        ) / ml2
        omega = np.clip(omega + dt * acc, self.state_low[1], self.state_high[1])
        theta = _wrap_angle(theta + dt * omega)
        return np.stack([theta, omega], axis=-1)

    def loss(self, s, a=None):
        return pendulum_loss(s, a, self.variant, self.theta_tol)

    def is_goal(self, s):
        return np.abs(np.asarray(s)[..., 0]) <= self.theta_tol

    def energy(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * self.mass * self.length**2 * s[..., 1] ** 2 + (
            self.mass * self.gravity * self.length * np.cos(s[..., 0])
        )

    def sample_initial(self, rng, n):
        # uniform on [-pi, pi] with (-init_exclusion, init_exclusion) removed
        span = np.pi - self.init_exclusion
        u = rng.uniform(-span, span, size=n)
        theta = u + np.sign(u) * self.init_exclusion
        return np.stack([theta, np.zeros(n)], axis=-1)

    @property
    def validation_start(self):
        return np.array([np.pi, 0.0])

    def success(self, states):
        """True if the last ``hold_fraction`` of the states stay near upright."""
        states = np.asarray(states)
        n_tail = max(1, int(round(self.hold_fraction * len(states))))
        return bool(np.all(np.abs(states[-n_tail:, 0]) < self.hold_band))


@dataclass(frozen=True)
class MountainCar(EnvModel):
    """Underpowered car in the valley ``y = sin(3x)``."""

    name = "mountain_car"
    actions: tuple = (-1.0, 0.0, 1.0)
    state_low: tuple = (-1.2, -0.07)
    state_high: tuple = (0.6, 0.07)
    force: float = 0.001
    gravity: float = 0.0025
    goal_x: float = 0.5
    goal_v: float = 0.0
    init_x_low: float = -0.6
    init_x_high: float = -0.4
    init_v_low: float = 0.0
    init_v_high: float = 0.0
    validation_x: float = -0.5
    absorbing_goal = True
    stop_at_goal = True

    def step(self, s, a):
        s = np.asarray(s, dtype=float)
        a = _check_actions(self, a)
        x, v = s[..., 0], s[..., 1]
        v = np.clip(v + self.force * a - self.gravity * np.cos(3.0 * x),
                    self.state_low[1], self.state_high[1])
        x = np.clip(x + v, self.state_low[0], self.state_high[0])
        v = np.where((x <= self.state_low[0]) & (v < 0), 0.0, v)
        return np.stack([x, v], axis=-1)

    def loss(self, s, a=None):
        return mountaincar_loss(s, a, self.variant, self.goal_x, self.goal_v)

    def is_goal(self, s):
        s = np.asarray(s)
        return (s[..., 0] >= self.goal_x) & (s[..., 1] >= self.goal_v)

    def sample_initial(self, rng, n):
        x = rng.uniform(self.init_x_low, self.init_x_high, size=n)
        if self.init_v_low == self.init_v_high:
            v = np.full(n, self.init_v_low)
        else:
            v = rng.uniform(self.init_v_low, self.init_v_high, size=n)
        return np.stack([x, v], axis=-1)

    @property
    def validation_start(self):
        return np.array([self.validation_x, 0.0])

    def success(self, states):
        return bool(np.any(self.is_goal(states)))


ENVIRONMENTS = {"pendulum": Pendulum, "mountain_car": MountainCar}


def make_env(name, **kwargs):
    try:
        return ENVIRONMENTS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown environment {name!r}") from None


def pendulum_step(s, a, dt=0.05, **kwargs):
    return Pendulum(dt_seconds=dt, **kwargs).step(s, a)


def pendulum_loss(s, a=None, variant="continuous", theta_tol=0.05):
    """``|theta| / pi`` (continuous) or ``0 if |theta| <= theta_tol else 1``."""
    theta = np.abs(np.asarray(s, dtype=float)[..., 0])
    if variant == "continuous":
        return theta / np.pi
    if variant == "discrete":
        return np.where(theta <= theta_tol, 0.0, 1.0)
    raise ValueError(f"unknown loss variant {variant!r}")


def mountaincar_step(s, a, **kwargs):
    return MountainCar(**kwargs).step(s, a)


def mountaincar_loss(s, a=None, variant="continuous", goal_x=0.5, goal_v=0.0):
    s = np.asarray(s, dtype=float)
    x, v = s[..., 0], s[..., 1]
    if variant == "continuous":
        return 0.5 * (np.maximum(goal_x - x, 0.0) + np.maximum(goal_v - v, 0.0))
    if variant == "discrete":
        return np.where((x >= goal_x) & (v >= goal_v), 0.0, 1.0)
    raise ValueError(f"unknown loss variant {variant!r}")


def embed(env, s, a):
    return env.embed(s, a)


@dataclass
class ConstantPolicy:
    action: float

    def __call__(self, states):
        return np.full(np.atleast_2d(states).shape[0], self.action)


@dataclass
class Rollout:
    """Raw transitions of a batch of episodes, episode-major order."""

    s: np.ndarray
    a: np.ndarray
    g: np.ndarray
    s_next: np.ndarray
    episode: np.ndarray = field(repr=False)


def collect(env, policy, epsilon, episodes, horizon, rng_seed):
    """Run ``episodes`` epsilon-greedy episodes of ``horizon`` actions each.

    All episodes advance in lockstep. With ``env.absorbing_goal`` a state in
    the goal set is frozen for the rest of its episode.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    actions = np.asarray(env.actions, dtype=float)
    D = env.state_dim
    S = np.empty((horizon, episodes, D))
    A = np.empty((horizon, episodes))
    Sn = np.empty((horizon, episodes, D))
    s = env.sample_initial(rng, episodes)
    for t in range(horizon):
        explore = rng.random(episodes) < epsilon
        random_a = actions[rng.integers(actions.size, size=episodes)]
        a = np.where(explore, random_a, policy(s))
        s_next = env.step(s, a)
        if env.absorbing_goal:
            done = env.is_goal(s)
            s_next = np.where(done[:, None], s, s_next)
        S[t], A[t], Sn[t] = s, a, s_next
        s = s_next
    S = S.transpose(1, 0, 2).reshape(-1, D)
    A = A.T.reshape(-1)
    Sn = Sn.transpose(1, 0, 2).reshape(-1, D)
    return Rollout(S, A, env.loss(S, A), Sn, np.repeat(np.arange(episodes), horizon))


def build_dataset(env, s, a, g, s_next, policy):
    """Embed raw transitions; ``z'`` uses the action ``policy(s')``."""
    return Dataset(
        g=g,
        z=env.embed(s, a),
        z_next=env.embed(s_next, policy(s_next)),
        s=s,
        a=a,
        s_next=s_next,
    )


def rollout(env, policy, epsilon, episodes, horizon, rng_seed):
    """Collect ``episodes * horizon`` transitions and embed them for ``policy``."""
    r = collect(env, policy, epsilon, episodes, horizon, rng_seed)
    return build_dataset(env, r.s, r.a, r.g, r.s_next, policy)


def save_dataset(path, data):
    """Write ``s, a, g, s'`` columns, tab-separated, 17 significant digits."""
    table = np.column_stack([data.s, data.a, data.g, data.s_next])
    np.savetxt(path, table, fmt="%.17g", delimiter="\t")


def load_transitions(path, state_dim):
    """Inverse of :func:`save_dataset`; returns ``(s, a, g, s_next)``."""
    table = np.loadtxt(path, delimiter="\t", ndmin=2)
    if table.shape[1] != 2 * state_dim + 2:
        raise ValueError(f"expected {2 * state_dim + 2} columns, got {table.shape[1]}")
    D = state_dim
    return table[:, :D], table[:, D], table[:, D + 1], table[:, D + 2:]
