"""Steepest descent on the parameter manifold with Armijo backtracking."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .bellman import loss, loss_and_gradient
from .errors import StepTooLargeError
from .manifold import EPS_SPD, product_inner, retract

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmijoConfig:
    """Line-search constants.

    Trial steps are ``alpha_bar * beta**M`` for ``M = 1, ..., max_backtracks``.
    """

    alpha_bar: float = 1.0
    beta: float = 0.5
    sigma: float = 1e-4
    n_steps: int = 100
    max_backtracks: int = 30
    grad_tol: float = 1e-8
    eps_spd: float = EPS_SPD

    def __post_init__(self):
        if not self.alpha_bar > 0:
            raise ValueError("alpha_bar must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")


@dataclass
class TraceRecord:
    j: int
    loss: float
    step: float
    grad_norm: float


def armijo_search(params, grad, loss_at, data, alpha, cfg):
    """Backtracking search along ``-grad``.

    Returns ``(step, next_params, next_loss)``. When no trial step up to
    ``cfg.max_backtracks`` satisfies the sufficient-decrease test, returns
    ``(0.0, params, loss_at)``. Trial points outside the SPD cone count as
    failed trials.
    """
    direction = -grad
    sq_norm = product_inner(params, grad, grad)
    step = cfg.alpha_bar
    for _ in range(cfg.max_backtracks):
        step *= cfg.beta
        try:
            trial = retract(params, step, direction, cfg.eps_spd)
        except StepTooLargeError:
            continue
        trial_loss = loss(trial, data, alpha)
        if loss_at - trial_loss >= cfg.sigma * step * sq_norm:
            return step, trial, trial_loss
    return 0.0, params, loss_at


def optimize(start, data, alpha, cfg, trace=None):
    """Run ``cfg.n_steps`` Armijo steepest-descent iterations from ``start``.

    Stops early when the gradient norm drops below ``cfg.grad_tol`` or a line
    search stalls (a stalled step leaves the point fixed, so every later step
    would stall identically). If ``trace`` is a list, one
    :class:`TraceRecord` per iteration is appended to it.
    """
    params = start
    for j in range(cfg.n_steps):
        lg = loss_and_gradient(params, data, alpha)
        gnorm = product_inner(params, lg.grad, lg.grad) ** 0.5
        if gnorm < cfg.grad_tol:
            break
        step, params, new_loss = armijo_search(params, lg.grad, lg.value, data, alpha, cfg)
        if trace is not None:
            trace.append(TraceRecord(j, new_loss, step, gnorm))
        if step == 0.0:
            log.debug("line search stalled at iteration %d (loss %.6g)", j, lg.value)
            break
    return params
