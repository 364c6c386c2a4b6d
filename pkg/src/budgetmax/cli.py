"""Experiment harness: config files, runs, traces, replay, and spot checks.

Config files are JSON with an explicit version::

    {
      "version": 1,
      "environment": {"kind": "knapsack_01", "n": 8, "T": 500, "seed": 7},
      "seeds": [0, 1, 2],
      "output_dir": "out",        // optional
      "bound_check": true          // optional, default false
    }

Unknown keys anywhere are errors, and validation reports every violation at
once. A run writes one CSV trace per engine seed plus the generated stream
(so it can be replayed) and a JSON report. Trace rows are
``trial,selected,profit,cum_profit,grad_norm,eta`` with the selected actions
as ascending semicolon-joined 0-based indices and floats at 17 significant
digits, which makes repeated runs byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ActionSet, Selection, TrialData
from .engine import Engine, TrialLog
from .environments import (EnvironmentSpec, KINDS, Stream, StreamFormatError,
                           check_constraints, generate, read_stream, write_stream)
from .oracles import (MAX_EXHAUSTIVE_ACTIONS, best_fixed_subset,
                      estimate_selection_probs, exact_selection_probs,
                      finite_diff_gradient)
from .projection import project_onto_feasible
from .sampler import analytic_selection_bounds
from .surrogate import surrogate_gradient, surrogate_value

CONFIG_VERSION = 1
TRACE_HEADER = "trial,selected,profit,cum_profit,grad_norm,eta"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    """Invalid experiment config; the message lists every violation."""


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSpec
    seeds: tuple
    output_dir: str | None = None
    bound_check: bool = False


@dataclass(frozen=True)
class RunReport:
    """Summary of one experiment (one stream, several engine seeds)."""

    kind: str
    n: int
    T: int
    seeds: tuple
    per_seed_profit: tuple
    mean_profit: float
    profit_stderr: float
    r_hat: float
    c_hat: float
    alpha: float
    delta: float
    bound_slack: float
    comparator_subset: tuple | None
    comparator_total: float | None
    bound_satisfied: bool | None
    large_beta_mode: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["seeds"] = list(self.seeds)
        d["per_seed_profit"] = list(self.per_seed_profit)
        d["comparator_subset"] = (None if self.comparator_subset is None
                                  else list(self.comparator_subset))
        return d

    def summary_lines(self) -> list[str]:
        lines = [
            f"environment: {self.kind} (n={self.n}, T={self.T})",
            f"engine seeds: {len(self.seeds)}",
            f"mean cumulative profit: {self.mean_profit:.6g} (stderr {self.profit_stderr:.3g})",
            f"reward/cost ceilings: r_hat={self.r_hat:.6g}, c_hat={self.c_hat:.6g}",
            f"constants: alpha={self.alpha:.6g}, delta={self.delta:.6g}",
        ]
        if self.large_beta_mode:
            lines.append("large-energy wrapper: ACTIVE (experimental, no performance guarantee)")
        if self.comparator_total is not None:
            lines.append(f"best fixed subset: {list(self.comparator_subset)} "
                         f"discounted total {self.comparator_total:.6g}")
            lines.append(f"allowed slack: {self.bound_slack:.6g}")
            verdict = "satisfied" if self.bound_satisfied else "VIOLATED"
            lines.append(f"performance bound: {verdict}")
        return lines


def _type_name(value) -> str:
    return type(value).__name__


def parse_config(data) -> ExperimentConfig:
    """Validate a decoded JSON object, collecting every violation."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {_type_name(data)}")

    allowed_top = {"version", "environment", "seeds", "output_dir", "bound_check"}
    for key in sorted(set(data) - allowed_top):
        problems.append(f"unknown key {key!r}")
    version = data.get("version")
    if version != CONFIG_VERSION:
        problems.append(f"version must be {CONFIG_VERSION}, got {version!r}")

    env_spec = None
    env = data.get("environment")
    if not isinstance(env, dict):
        problems.append(f"environment must be an object, got {_type_name(env)}")
    else:
        allowed_env = {"kind", "n", "T", "seed", "r_max", "cost_range", "beta_max",
                       "value_range", "c_max", "shift_segments"}
        for key in sorted(set(env) - allowed_env):
            problems.append(f"unknown environment key {key!r}")
        kwargs = {k: v for k, v in env.items() if k in allowed_env}
        for rng_key in ("cost_range", "value_range"):
            if rng_key in kwargs and isinstance(kwargs[rng_key], list):
                kwargs[rng_key] = tuple(kwargs[rng_key])
        missing = [k for k in ("kind", "n", "T") if k not in kwargs]
        if missing:
            problems.append(f"environment missing required keys: {missing}")
        else:
            try:
                env_spec = EnvironmentSpec(**kwargs)
                env_spec.validate()
            except (TypeError, ValueError) as exc:
                problems.append(str(exc))
                env_spec = None

    seeds = data.get("seeds")
    if not (isinstance(seeds, list) and seeds
            and all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds)):
        problems.append(f"seeds must be a non-empty list of non-negative integers, got {seeds!r}")
        seeds = []
    if len(set(seeds)) != len(seeds):
        problems.append("seeds must be distinct")

    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        problems.append(f"output_dir must be a string, got {_type_name(output_dir)}")
    bound_check = data.get("bound_check", False)
    if not isinstance(bound_check, bool):
        problems.append(f"bound_check must be a boolean, got {_type_name(bound_check)}")

    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems))
    return ExperimentConfig(environment=env_spec, seeds=tuple(seeds),
                            output_dir=output_dir, bound_check=bound_check)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class TraceWriter:
    """Streams trial logs to a CSV trace, tracking the cumulative profit."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="ascii", newline="\n")
        self._fh.write(TRACE_HEADER + "\n")
        self.cum_profit = 0.0

    def write(self, log: TrialLog) -> None:
        self.cum_profit += log.profit
        selected = ";".join(str(i) for i in log.selection.indices())
        self._fh.write(f"{log.trial},{selected},{_fmt(log.profit)},"
                       f"{_fmt(self.cum_profit)},{_fmt(log.grad_norm)},{_fmt(log.eta)}\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_trace(logs, path) -> None:
    with TraceWriter(path) as writer:
        for log in logs:
            writer.write(log)


def read_trace(path, action_set: ActionSet) -> list[TrialLog]:
    """Parse a trace CSV back into logs (cum_profit is checked, not stored)."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: missing trace header")
    logs = []
    cum = 0.0
    for k, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 6:
            raise ValueError(f"{path} line {k}: expected 6 fields, got {len(fields)}")
        trial = int(fields[0])
        indices = [int(i) for i in fields[1].split(";")] if fields[1] else []
        selection = Selection.from_indices(indices, action_set.z)
        prof, cum_read, grad_norm, eta = (float(f) for f in fields[2:])
        cum += prof
        if not math.isclose(cum, cum_read, rel_tol=0.0, abs_tol=1e-9 * max(1.0, abs(cum))):
            raise ValueError(f"{path} line {k}: cumulative profit mismatch")
        logs.append(TrialLog(trial, selection, prof, grad_norm, eta))
    return logs


def run_experiment(config: ExperimentConfig, stream: Stream | None = None) -> RunReport:
    """Run every engine seed over one stream and summarize.

    The stream is generated from the config's environment unless one is
    passed in (replay); either way it is revalidated against the kind's
    constraint pattern before any engine sees it.
    """
    env = config.environment
    if stream is None:
        stream = generate(env)
    else:
        if (stream.n, stream.T) != (env.n, env.T):
            raise ConfigError(
                f"stream shape (n={stream.n}, T={stream.T}) does not match "
                f"config (n={env.n}, T={env.T})")
    check_constraints(stream, env)

    out_dir = None
    if config.output_dir is not None:
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_stream(stream, out_dir / "stream.csv")

    trials = [stream.trial(t) for t in range(stream.T)]
    per_seed = []
    large_beta = False
    for seed in config.seeds:
        writer = TraceWriter(out_dir / f"trace_seed{seed}.csv") if out_dir else None
        engine = Engine(stream.action_set, seed,
                        log_sink=writer.write if writer else None,
                        history_cap=0 if writer else None)
        large_beta = engine.large_beta_mode
        total = 0.0
        for trial in trials:
            engine.select()
            total += engine.observe(trial).profit
        if writer:
            writer.close()
        per_seed.append(total)

    per_seed_arr = np.array(per_seed)
    mean = float(per_seed_arr.mean())
    stderr = (float(per_seed_arr.std(ddof=1) / math.sqrt(len(per_seed)))
              if len(per_seed) > 1 else 0.0)
    aset = stream.action_set
    slack = aset.n * math.sqrt(2.0 * stream.T) * aset.delta * (stream.r_hat + stream.c_hat)

    comparator_subset = comparator_total = bound_satisfied = None
    if config.bound_check:
        if aset.n > MAX_EXHAUSTIVE_ACTIONS:
            raise ConfigError(f"bound_check needs n <= {MAX_EXHAUSTIVE_ACTIONS}, got {aset.n}")
        comp = best_fixed_subset(stream, aset, aset.alpha, aset.delta)
        comparator_subset = comp.subset
        comparator_total = comp.discounted_total
        bound_satisfied = mean >= comparator_total - slack - 3.0 * stderr

    report = RunReport(
        kind=env.kind, n=stream.n, T=stream.T, seeds=config.seeds,
        per_seed_profit=tuple(per_seed), mean_profit=mean, profit_stderr=stderr,
        r_hat=stream.r_hat, c_hat=stream.c_hat, alpha=aset.alpha, delta=aset.delta,
        bound_slack=slack, comparator_subset=comparator_subset,
        comparator_total=comparator_total, bound_satisfied=bound_satisfied,
        large_beta_mode=large_beta,
    )
    if out_dir:
        (out_dir / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


def replay(stream_path, config: ExperimentConfig) -> RunReport:
    """Re-run an experiment against a previously written stream file."""
    return run_experiment(config, stream=read_stream(stream_path))


def _probcheck(n: int, n_samples: int, seed: int, out) -> int:
    """Monte Carlo marginals vs the analytic sandwich and exact product form."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 0.49, n)
    z[rng.random(n) < 0.2] = 0.0
    aset = ActionSet.from_energies(z)
    w = project_onto_feasible(rng.uniform(0.0, 1.5, n), aset.z)
    freq, sigma = estimate_selection_probs(w, aset, n_samples, seed + 1)
    exact = exact_selection_probs(w, aset)
    ok = True
    print(f"probcheck: n={n}, samples={n_samples}, delta={aset.delta:.6g}", file=out)
    for i in range(n):
        lower, upper = analytic_selection_bounds(w, i, aset.delta)
        pad = 3.0 * sigma[i]
        in_sandwich = lower - pad <= freq[i] <= upper + pad
        near_exact = abs(freq[i] - exact[i]) <= 4.0 * max(sigma[i], 1e-9)
        ok = ok and in_sandwich and near_exact
        print(f"  action {i}: freq={freq[i]:.5f} exact={exact[i]:.5f} "
              f"bounds=[{lower:.5f}, {upper:.5f}] "
              f"{'ok' if in_sandwich and near_exact else 'VIOLATION'}", file=out)
    print(f"probcheck: {'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_OK if ok else EXIT_INVALID


def _gradcheck(instances: int, seed: int, out) -> int:
    """Analytic gradient vs central differences over random small trials."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(instances):
        n = int(rng.integers(1, 9))
        delta = [0.01, 0.25, 1.0][k % 3]
        rewards = np.round(rng.uniform(0.0, 2.0, n), 3)
        costs = np.round(rng.uniform(-1.0, 1.0, n), 3)
        trial = TrialData.from_arrays(rewards, costs)
        w = rng.uniform(0.0, 1.5, n)
        g = surrogate_gradient(w, trial, delta)
        fd = finite_diff_gradient(lambda v: surrogate_value(v, trial, delta), w, 1e-5)
        scale = np.maximum(1.0, np.maximum(np.abs(g), np.abs(fd)))
        worst = max(worst, float(np.max(np.abs(g - fd) / scale)))
    ok = worst <= 1e-6
    print(f"gradcheck: {instances} instances, worst relative error {worst:.3e}", file=out)
    print(f"gradcheck: {'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetmax",
        description="Online budget-constrained subset selection harness.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for commands that draw their own instances")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides the config's output_dir)")
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", help="generate the configured stream and run every seed")
    p_replay = sub.add_parser("replay", help="re-run a saved stream file")
    p_replay.add_argument("--stream", required=True, help="stream file from a previous run")
    p_prob = sub.add_parser("probcheck", help="Monte Carlo check of selection marginals")
    p_prob.add_argument("--actions", type=int, default=6)
    p_prob.add_argument("--samples", type=int, default=200_000)
    p_grad = sub.add_parser("gradcheck", help="finite-difference check of the gradient")
    p_grad.add_argument("--instances", type=int, default=60)
    return parser


def _require_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError(f"{args.command} requires --config")
    config = load_config(args.config)
    if args.out is not None:
        config = ExperimentConfig(environment=config.environment, seeds=config.seeds,
                                  output_dir=args.out, bound_check=config.bound_check)
    return config


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            report = run_experiment(_require_config(args))
            print("\n".join(report.summary_lines()), file=out)
            if report.bound_satisfied is False:
                return EXIT_INVALID
        elif args.command == "replay":
            report = replay(args.stream, _require_config(args))
            print("\n".join(report.summary_lines()), file=out)
            if report.bound_satisfied is False:
                return EXIT_INVALID
        elif args.command == "probcheck":
            return _probcheck(args.actions, args.samples, args.seed, out)
        elif args.command == "gradcheck":
            return _gradcheck(args.instances, args.seed, out)
    except (ConfigError, StreamFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())
