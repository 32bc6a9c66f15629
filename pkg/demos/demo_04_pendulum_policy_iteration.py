"""
Policy iteration on the pendulum
================================

Each iteration collects 20 episodes of 70 steps with the current greedy
policy (plus epsilon exploration), fits the GMM-QF to the Bellman residual
by warm-started Armijo descent, and validates the new greedy policy from the
hanging-down state.
"""

from gmmqf import ArmijoConfig, Pendulum, RolloutConfig, run_policy_iteration
from gmmqf.policy_iteration import validation_rollout

env = Pendulum()
records = run_policy_iteration(
    env, n_iters=5, n_components=5, alpha=0.9,
    armijo=ArmijoConfig(n_steps=50), rollout=RolloutConfig(20, 70, 0.1), seed=0,
)
for r in records:
    print(f"iteration {r.n}: inner loss {r.inner_loss_start:8.2f} -> {r.inner_loss:8.2f}, "
          f"validation loss {r.total_loss:7.1f}, upright hold {r.success}")
