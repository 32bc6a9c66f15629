"""Seeded batches of policy-iteration runs, CSV learning curves, and the CLI.

Config files are flat ``key = value`` text; ``#`` starts a comment. Unknown
keys are rejected. Every run writes::

    <out>/config.echo        every resolved parameter; re-runnable as a config
    <out>/aggregate.csv      per-iteration statistics over runs
    <out>/runs/seed_<s>.csv  per-run trace

Numbers are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .envs import ENVIRONMENTS, LOSS_VARIANTS
from .errors import ConfigError, NotSPDError, NumericalError, StepTooLargeError
from .optim import ArmijoConfig
from .policy_iteration import InitConfig, RolloutConfig, run_policy_iteration

log = logging.getLogger(__name__)

AGGREGATE_HEADER = "iteration,mean_total_loss,median_total_loss,q25,q75,mean_inner_loss"
RUN_HEADER = "iteration,total_loss,inner_loss_start,inner_loss,steps_to_goal,success"
EARLY_WINDOW = (0, 10)

# config key -> environment dataclass field, per environment
ENV_KEYS = {
    "pendulum": {
        "mass_kg": "mass",
        "length_m": "length",
        "gravity_m_per_s2": "gravity",
        "friction_n_m_s": "friction",
        "dt_seconds": "dt_seconds",
        "theta_tol_rad": "theta_tol",
        "init_exclusion_rad": "init_exclusion",
        "hold_band_rad": "hold_band",
        "hold_fraction": "hold_fraction",
    },
    "mountain_car": {
        "force_per_step": "force",
        "gravity_per_step": "gravity",
        "goal_x": "goal_x",
        "goal_v_per_step": "goal_v",
        "init_x_low": "init_x_low",
        "init_x_high": "init_x_high",
        "init_v_low_per_step": "init_v_low",
        "init_v_high_per_step": "init_v_high",
        "validation_x": "validation_x",
    },
}


def _fmt(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "pendulum"
    loss_variant: str = "continuous"
    scale_inputs: bool = True
    n_components: int = 5
    alpha: float = 0.9
    armijo_alpha_bar: float = 1.0
    armijo_beta: float = 0.5
    armijo_sigma: float = 1e-4
    armijo_steps: int = 100
    armijo_max_backtracks: int = 30
    armijo_grad_tol: float = 1e-8
    eps_spd: float = 1e-10
    rollout_episodes: int = 20
    rollout_horizon_steps: int = 70
    rollout_epsilon: float = 0.1
    init_cov_scale: float = 0.25
    init_mean_low: float = -1.0
    init_mean_high: float = 1.0
    validation_horizon_steps: int = 1000
    n_iters: int = 20
    n_runs: int = 20
    base_seed: int = 0
    output_dir: str = "results"
    # environment constants keyed as in ENV_KEYS; missing keys take defaults
    env_params: tuple = field(default=(), compare=True)

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env must be one of {sorted(ENVIRONMENTS)}, got {self.env!r}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"loss_variant must be one of {LOSS_VARIANTS}")
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must lie in [0, 1)")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.n_iters < 0 or self.validation_horizon_steps < 1:
            raise ConfigError("n_iters must be >= 0 and validation_horizon_steps >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be non-negative")
        allowed = ENV_KEYS[self.env]
        params = dict(self.env_params)
        for key in params:
            if key not in allowed:
                raise ConfigError(f"key {key!r} does not apply to env {self.env!r}")
        object.__setattr__(self, "env_params", tuple(sorted(params.items())))
        # building the components runs their own validation
        try:
            self.armijo()
            self.rollout()
            self.init()
            self.make_env()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def armijo(self):
        return ArmijoConfig(
            alpha_bar=self.armijo_alpha_bar,
            beta=self.armijo_beta,
            sigma=self.armijo_sigma,
            n_steps=self.armijo_steps,
            max_backtracks=self.armijo_max_backtracks,
            grad_tol=self.armijo_grad_tol,
            eps_spd=self.eps_spd,
        )

    def rollout(self):
        return RolloutConfig(self.rollout_episodes, self.rollout_horizon_steps, self.rollout_epsilon)

    def init(self):
        return InitConfig(self.init_cov_scale, self.init_mean_low, self.init_mean_high)

    def make_env(self):
        kwargs = {ENV_KEYS[self.env][k]: v for k, v in self.env_params}
        return ENVIRONMENTS[self.env](variant=self.loss_variant, scale_inputs=self.scale_inputs, **kwargs)

    def resolved_env_params(self):
        env = self.make_env()
        return [(k, getattr(env, attr)) for k, attr in ENV_KEYS[self.env].items()]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def seeds(self):
        return [self.base_seed + i for i in range(self.n_runs)]


_SCALAR_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "env_params"}


def _parse_value(key, text, typ):
    try:
        if typ == "bool":
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {typ}") from None


def parse_config(text):
    """Parse config text into an :class:`ExperimentConfig`."""
    values, env_params = {}, {}
    env_keys = {k for keys in ENV_KEYS.values() for k in keys}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key in values or key in env_params:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _SCALAR_FIELDS:
            values[key] = _parse_value(key, val, _SCALAR_FIELDS[key].type)
        elif key in env_keys:
            env_params[key] = _parse_value(key, val, "float")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return ExperimentConfig(**values, env_params=tuple(env_params.items()))


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _echo_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_echo(cfg):
    """Text listing every resolved parameter; ``parse_config`` reads it back."""
    lines = [f"{name} = {_echo_value(getattr(cfg, name))}" for name in _SCALAR_FIELDS]
    lines += [f"{k} = {_echo_value(float(v))}" for k, v in cfg.resolved_env_params()]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunResult:
    seed: int
    total_loss: np.ndarray  # (n_iters,)
    inner_loss: np.ndarray
    csv: str


def _run_csv(records):
    rows = [RUN_HEADER]
    for r in records:
        steps = "" if r.steps_to_goal is None else str(r.steps_to_goal)
        rows.append(",".join([str(r.n), _fmt(r.total_loss), _fmt(r.inner_loss_start),
                              _fmt(r.inner_loss), steps, str(int(r.success))]))
    return "\n".join(rows) + "\n"


def run_single(cfg, seed):
    records = run_policy_iteration(
        cfg.make_env(), cfg.n_iters, cfg.n_components, cfg.alpha, cfg.armijo(),
        cfg.rollout(), cfg.init(), seed, cfg.validation_horizon_steps,
    )
    total = np.array([r.total_loss for r in records], dtype=float)
    inner = np.array([r.inner_loss for r in records], dtype=float)
    return RunResult(seed, total, inner, _run_csv(records))


def _run_single_star(args):
    return run_single(*args)


def aggregate_csv(results, n_iters):
    """Per-iteration statistics; rows follow iteration order, runs are keyed by seed."""
    results = sorted(results, key=lambda r: r.seed)
    rows = [AGGREGATE_HEADER]
    if n_iters == 0:
        return rows[0] + "\n"
    total = np.stack([r.total_loss for r in results])
    inner = np.stack([r.inner_loss for r in results])
    if not (np.all(np.isfinite(total)) and np.all(np.isfinite(inner))):
        raise NumericalError("non-finite loss in run traces")
    q25, med, q75 = np.percentile(total, [25, 50, 75], axis=0)
    mean, mean_inner = total.mean(axis=0), inner.mean(axis=0)
    for n in range(n_iters):
        rows.append(",".join([str(n)] + [_fmt(v[n]) for v in (mean, med, q25, q75, mean_inner)]))
    return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    runs: tuple
    out_dir: Path

    @property
    def total_loss(self):
        """(n_runs, n_iters) validation losses, rows ordered by seed."""
        return np.stack([r.total_loss for r in self.runs]) if self.runs else np.empty((0, 0))


def default_workers():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_experiment(cfg, workers=None, out_dir=None):
    """Execute ``cfg.n_runs`` seeded runs and write the summary files."""
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    jobs = [(cfg, s) for s in cfg.seeds()]
    if workers == 1 or len(jobs) == 1:
        results = [_run_single_star(j) for j in jobs]
    else:
        with get_context("spawn").Pool(min(workers, len(jobs))) as pool:
            results = pool.map(_run_single_star, jobs)
    results = tuple(sorted(results, key=lambda r: r.seed))
    agg = aggregate_csv(results, cfg.n_iters)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(config_echo(cfg))
    (out / "aggregate.csv").write_text(agg)
    for r in results:
        (out / "runs" / f"seed_{r.seed}.csv").write_text(r.csv)
    return ExperimentResult(cfg, results, out)


@dataclass(frozen=True)
class KSweepReport:
    ks: tuple
    window: tuple
    window_means: tuple  # mean validation loss per K over the window
    ranking: tuple  # groups of K, best (lowest loss) first; a group holds ties
    paired_fraction: float  # seed-paired comparisons with loss non-increasing in K
    n_comparisons: int

    def larger_k_dominates(self, threshold=0.7):
        return self.n_comparisons > 0 and self.paired_fraction >= threshold

    def format(self):
        lo, hi = self.window
        lines = [f"window: iterations {lo}..{hi}"]
        for k, m in zip(self.ks, self.window_means):
            lines.append(f"K={k}: mean validation loss {m:.6g}")
        groups = [" = ".join(f"K={k}" for k in g) for g in self.ranking]
        lines.append("ranking (best first): " + " < ".join(groups))
        if any(len(g) > 1 for g in self.ranking):
            lines.append("ties: " + "; ".join(" = ".join(map(str, g)) for g in self.ranking if len(g) > 1))
        lines.append(
            f"larger K no worse in {self.paired_fraction:.1%} of {self.n_comparisons} seed-paired comparisons"
        )
        return "\n".join(lines) + "\n"


def _check_k_sweep_configs(cfgs):
    base = cfgs[0].replace(n_components=1, output_dir="")
    for c in cfgs[1:]:
        if c.replace(n_components=1, output_dir="") != base:
            diff = [f.name for f in fields(ExperimentConfig)
                    if f.name not in ("n_components", "output_dir")
                    and getattr(c, f.name) != getattr(cfgs[0], f.name)]
            raise ConfigError(f"K-sweep configs differ beyond K: {', '.join(diff)}")


def compare_k_sweep(results, window=EARLY_WINDOW):
    """Rank K values by mean validation loss over an iteration window.

    ``results`` is a sequence of :class:`ExperimentResult` whose configs
    differ only in ``n_components``. For every seed and every pair
    ``K_i < K_j`` one comparison is counted, and it succeeds when the window
    mean for ``K_j`` is at most that for ``K_i``.
    """
    results = list(results)
    if not results:
        raise ConfigError("no experiments to compare")
    _check_k_sweep_configs([r.config for r in results])
    results.sort(key=lambda r: r.config.n_components)
    lo, hi = window
    per_run = [r.total_loss[:, lo:hi + 1].mean(axis=1) if r.total_loss.size else np.zeros(len(r.runs))
               for r in results]
    means = [float(p.mean()) for p in per_run]
    ks = tuple(r.config.n_components for r in results)

    order = sorted(range(len(ks)), key=lambda i: (means[i], ks[i]))
    ranking = []
    for i in order:
        if ranking and means[ranking[-1][-1]] == means[i]:
            ranking[-1].append(i)
        else:
            ranking.append([i])

    hits = total = 0
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            if ks[i] == ks[j]:
                continue
            hits += int(np.sum(per_run[j] <= per_run[i]))
            total += per_run[i].size
    frac = hits / total if total else 1.0
    return KSweepReport(
        ks, (lo, hi), tuple(means), tuple(tuple(ks[i] for i in g) for g in ranking), frac, total
    )


def sweep_k(cfg, ks, workers=None, out_dir=None):
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    results = [
        run_experiment(cfg.replace(n_components=k, output_dir=str(out / f"K{k}")), workers)
        for k in ks
    ]
    report = compare_k_sweep(results)
    (out / "k_sweep.txt").write_text(report.format())
    return results, report


def _parse_ks(text):
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--k must be a comma-separated list of integers, got {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise ConfigError("--k needs at least one positive integer")
    return ks


def build_parser():
    p = argparse.ArgumentParser(prog="gmmqf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a seeded batch of policy-iteration experiments")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--out", default=None)
    s = sub.add_parser("sweep-k", help="run one experiment per K and compare them")
    s.add_argument("--config", required=True)
    s.add_argument("--k", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default=None)
    g = sub.add_parser("validate-gradients", help="finite-difference check of the gradients")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--instances", type=int, default=50)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-gradients":
            from .gradcheck import run_suite

            r = run_suite(args.seed, args.instances)
            print(f"xi {r.xi:.3e}\nmeans {r.means:.3e}\ncovs {r.covs:.3e}")
            if not (r.xi < 1e-6 and r.means < 1e-6 and r.covs < 1e-5):
                print("gradient check FAILED", file=sys.stderr)
                return 2
            return 0
        cfg = load_config(args.config)
        if args.command == "run":
            res = run_experiment(cfg, args.workers, args.out)
            print(f"wrote {res.out_dir}")
        else:
            _, report = sweep_k(cfg, _parse_ks(args.k), args.workers, args.out)
            print(report.format(), end="")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, NotSPDError, StepTooLargeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
