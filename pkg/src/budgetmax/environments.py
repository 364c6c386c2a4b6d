"""Trial-stream generators and the line-oriented stream file format.

Four families:

- ``facility_location``: zero energies, non-negative costs, rewards are
  clipped linear in the distance between random sites and per-trial users.
- ``knapsack_median``: positive energies, zero costs, same reward geometry.
- ``knapsack_01``: zero rewards, non-positive costs (item values enter as
  negated costs, so profit is the summed value of the selected items).
- ``random_adversarial``: bounded uniform rewards/costs/energies with an
  optional piecewise-constant shift schedule that changes which action is
  favored from segment to segment.

Stream files are plain text: a preamble line ``n,T,z_1,...,z_n`` followed by
one line ``t,r_1,...,r_n,c_1,...,c_n`` per trial, floats printed with 17
significant digits so a write/read round trip is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ActionSet, TrialData

KINDS = ("facility_location", "knapsack_median", "knapsack_01", "random_adversarial")


class StreamFormatError(ValueError):
    """Malformed stream file; messages carry the 1-based line number."""


@dataclass(frozen=True)
class EnvironmentSpec:
    """Generator parameters. Only the fields of the chosen kind matter."""

    kind: str
    n: int
    T: int
    seed: int = 0
    r_max: float = 1.0                      # reward ceiling
    cost_range: tuple = (0.0, 0.2)          # facility_location cost interval
    beta_max: float = 0.49                  # energy ceiling for energetic kinds
    value_range: tuple = (0.0, 1.0)         # knapsack_01 item values
    c_max: float = 1.0                      # adversarial |cost| ceiling
    shift_segments: int = 0                 # adversarial favored-action segments

    def validate(self) -> None:
        problems = []
        if self.kind not in KINDS:
            problems.append(f"unknown kind {self.kind!r} (expected one of {KINDS})")
        if not (isinstance(self.n, int) and self.n >= 1):
            problems.append(f"n must be a positive integer, got {self.n!r}")
        if not (isinstance(self.T, int) and self.T >= 1):
            problems.append(f"T must be a positive integer, got {self.T!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if not self.r_max >= 0.0:
            problems.append(f"r_max must be >= 0, got {self.r_max!r}")
        for name, rng_pair in (("cost_range", self.cost_range), ("value_range", self.value_range)):
            pair = tuple(rng_pair) if isinstance(rng_pair, (tuple, list)) else None
            if pair is None or len(pair) != 2 or not 0.0 <= pair[0] <= pair[1]:
                problems.append(f"{name} must be a pair with 0 <= lo <= hi, got {rng_pair!r}")
        if not 0.0 < self.beta_max <= 1.0:
            problems.append(f"beta_max must lie in (0, 1], got {self.beta_max!r}")
        if not self.c_max >= 0.0:
            problems.append(f"c_max must be >= 0, got {self.c_max!r}")
        if not (isinstance(self.shift_segments, int) and self.shift_segments >= 0):
            problems.append(f"shift_segments must be a non-negative integer, got {self.shift_segments!r}")
        elif isinstance(self.n, int) and self.shift_segments > max(self.n, 0):
            problems.append(f"shift_segments ({self.shift_segments}) cannot exceed n ({self.n})")
        if problems:
            raise ValueError("invalid environment spec: " + "; ".join(problems))


@dataclass(frozen=True)
class Stream:
    """A full instance: fixed energies plus (T, n) reward and cost matrices."""

    action_set: ActionSet
    rewards: np.ndarray
    costs: np.ndarray

    @property
    def T(self) -> int:
        return self.rewards.shape[0]

    @property
    def n(self) -> int:
        return self.rewards.shape[1]

    @property
    def r_hat(self) -> float:
        """Largest reward in the stream (0 for an all-zero stream)."""
        return float(np.max(self.rewards)) if self.rewards.size else 0.0

    @property
    def c_hat(self) -> float:
        """Largest absolute cost in the stream."""
        return float(np.max(np.abs(self.costs))) if self.costs.size else 0.0

    def trial(self, t: int) -> TrialData:
        return TrialData.from_arrays(self.rewards[t], self.costs[t])

    def trials(self):
        for t in range(self.T):
            yield self.trial(t)


def site_rewards(sites: np.ndarray, users: np.ndarray, r_max: float) -> np.ndarray:
    """Clipped linear reward ``max(0, r_max - distance)`` per (user, site).

    A user sitting exactly on a site earns the full ``r_max``.
    """
    d = np.linalg.norm(users[:, None, :] - sites[None, :, :], axis=2)
    return np.maximum(0.0, r_max - d)


def _geometry(rng, n: int, T: int, r_max: float) -> np.ndarray:
    sites = rng.random((n, 2))
    users = rng.random((T, 2))
    return site_rewards(sites, users, r_max)


def gen_facility_location(spec: EnvironmentSpec) -> Stream:
    rng = np.random.default_rng(spec.seed)
    rewards = _geometry(rng, spec.n, spec.T, spec.r_max)
    lo, hi = spec.cost_range
    costs = rng.uniform(lo, hi, size=(spec.T, spec.n))
    stream = Stream(ActionSet.from_energies(np.zeros(spec.n)), rewards, costs)
    check_constraints(stream, spec)
    return stream


def gen_knapsack_median(spec: EnvironmentSpec) -> Stream:
    rng = np.random.default_rng(spec.seed)
    z = spec.beta_max * (1.0 - rng.random(spec.n))  # strictly positive
    rewards = _geometry(rng, spec.n, spec.T, spec.r_max)
    costs = np.zeros((spec.T, spec.n))
    stream = Stream(ActionSet.from_energies(z), rewards, costs)
    check_constraints(stream, spec)
    return stream


def gen_knapsack_01(spec: EnvironmentSpec) -> Stream:
    rng = np.random.default_rng(spec.seed)
    z = spec.beta_max * (1.0 - rng.random(spec.n))
    vlo, vhi = spec.value_range
    values = rng.uniform(vlo, vhi, size=(spec.T, spec.n))
    stream = Stream(ActionSet.from_energies(z),
                    np.zeros((spec.T, spec.n)), -values)
    check_constraints(stream, spec)
    return stream


def gen_random_adversarial(spec: EnvironmentSpec) -> Stream:
    rng = np.random.default_rng(spec.seed)
    z = rng.uniform(0.0, spec.beta_max, spec.n)
    costs = rng.uniform(-spec.c_max, spec.c_max, size=(spec.T, spec.n))
    if spec.shift_segments >= 2:
        k = spec.shift_segments
        rewards = rng.uniform(0.0, 0.5 * spec.r_max, size=(spec.T, spec.n))
        favored = rng.permutation(spec.n)[:k]
        segment = np.minimum((np.arange(spec.T) * k) // spec.T, k - 1)
        boost = rng.uniform(0.75 * spec.r_max, spec.r_max, size=spec.T)
        rewards[np.arange(spec.T), favored[segment]] = boost
    else:
        rewards = rng.uniform(0.0, spec.r_max, size=(spec.T, spec.n))
    stream = Stream(ActionSet.from_energies(z), rewards, costs)
    check_constraints(stream, spec)
    return stream


_GENERATORS = {
    "facility_location": gen_facility_location,
    "knapsack_median": gen_knapsack_median,
    "knapsack_01": gen_knapsack_01,
    "random_adversarial": gen_random_adversarial,
}


def generate(spec: EnvironmentSpec) -> Stream:
    """Dispatch to the kind's generator after validating the spec."""
    spec.validate()
    return _GENERATORS[spec.kind](spec)


def check_constraints(stream: Stream, spec: EnvironmentSpec) -> None:
    """Re-assert the constraint pattern the kind promises, on every trial."""
    z = stream.action_set.z
    R, C = stream.rewards, stream.costs
    problems = []
    if R.shape != (spec.T, spec.n) or C.shape != (spec.T, spec.n):
        problems.append(f"stream shape {R.shape}/{C.shape} does not match spec ({spec.T}, {spec.n})")
    if np.any(R < 0.0):
        problems.append("negative rewards present")
    if spec.kind == "facility_location":
        if np.any(z != 0.0):
            problems.append("energies must all be zero")
        if np.any(C < 0.0):
            problems.append("costs must be non-negative")
        if np.any(R > spec.r_max):
            problems.append("rewards exceed r_max")
    elif spec.kind == "knapsack_median":
        if np.any(C != 0.0):
            problems.append("costs must all be zero")
        if np.any(z <= 0.0) or np.any(z > spec.beta_max):
            problems.append("energies must lie in (0, beta_max]")
    elif spec.kind == "knapsack_01":
        if np.any(R != 0.0):
            problems.append("rewards must all be zero")
        if np.any(C > 0.0):
            problems.append("costs must be non-positive")
        if np.any(z <= 0.0) or np.any(z > spec.beta_max):
            problems.append("energies must lie in (0, beta_max]")
    elif spec.kind == "random_adversarial":
        if np.any(R > spec.r_max):
            problems.append("rewards exceed r_max")
        if np.any(np.abs(C) > spec.c_max):
            problems.append("costs exceed c_max in magnitude")
        if np.any(z > spec.beta_max):
            problems.append("energies exceed beta_max")
    if problems:
        raise ValueError(f"{spec.kind} constraints violated: " + "; ".join(problems))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_stream(stream: Stream, path) -> None:
    """Write the preamble plus one line per trial (see module docstring)."""
    lines = [",".join([str(stream.n), str(stream.T)]
                      + [_fmt(v) for v in stream.action_set.z])]
    for t in range(stream.T):
        lines.append(",".join([str(t + 1)]
                              + [_fmt(v) for v in stream.rewards[t]]
                              + [_fmt(v) for v in stream.costs[t]]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _parse_floats(fields, lineno, what):
    try:
        return [float(f) for f in fields]
    except ValueError as exc:
        raise StreamFormatError(f"line {lineno}: bad {what}: {exc}") from None


def read_stream(path) -> Stream:
    """Parse a stream file, validating structure line by line."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines:
        raise StreamFormatError("line 1: empty stream file")
    head = lines[0].split(",")
    if len(head) < 2:
        raise StreamFormatError("line 1: preamble needs at least n and T")
    try:
        n, T = int(head[0]), int(head[1])
    except ValueError:
        raise StreamFormatError(f"line 1: n and T must be integers, got {head[:2]}") from None
    if n < 1 or T < 1:
        raise StreamFormatError(f"line 1: n and T must be positive, got n={n}, T={T}")
    if len(head) != 2 + n:
        raise StreamFormatError(f"line 1: expected {2 + n} fields (n, T, {n} energies), got {len(head)}")
    z = np.array(_parse_floats(head[2:], 1, "energy"))

    rewards = np.zeros((T, n))
    costs = np.zeros((T, n))
    for t in range(T):
        lineno = t + 2
        if t + 1 >= len(lines) or not lines[t + 1].strip():
            raise StreamFormatError(f"line {lineno}: expected trial {t + 1}, found end of file")
        fields = lines[t + 1].split(",")
        if len(fields) != 1 + 2 * n:
            raise StreamFormatError(
                f"line {lineno}: expected {1 + 2 * n} fields (t, {n} rewards, {n} costs), got {len(fields)}")
        try:
            tag = int(fields[0])
        except ValueError:
            raise StreamFormatError(f"line {lineno}: trial index must be an integer, got {fields[0]!r}") from None
        if tag != t + 1:
            raise StreamFormatError(f"line {lineno}: expected trial {t + 1}, got {tag}")
        row = _parse_floats(fields[1:], lineno, "reward/cost")
        rewards[t] = row[:n]
        costs[t] = row[n:]
        if np.any(rewards[t] < 0.0):
            raise StreamFormatError(f"line {lineno}: negative reward")
    extra = [k for k in range(T + 1, len(lines)) if lines[k].strip()]
    if extra:
        raise StreamFormatError(f"line {extra[0] + 1}: trailing data after trial {T}")
    try:
        action_set = ActionSet.from_energies(z)
    except ValueError as exc:
        raise StreamFormatError(f"line 1: {exc}") from None
    return Stream(action_set, rewards, costs)
