"""Gaussian-mixture Q-functions learned by Riemannian policy iteration."""

from .bellman import Dataset, LossGradient, Transition, loss, loss_and_gradient
from .envs import MountainCar, Pendulum, make_env, rollout
from .errors import ConfigError, NotSPDError, NumericalError, ShapeError, StepTooLargeError
from .gmm import gaussian_kernel, q_eval, q_greedy_action
from .manifold import GmmParams, TangentVector, bw_exp, bw_inner, lyapunov_solve, product_inner, retract
from .optim import ArmijoConfig, armijo_search, optimize
from .policy_iteration import InitConfig, RolloutConfig, run_policy_iteration

__version__ = "0.1.0"
