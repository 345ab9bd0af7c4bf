"""Seeded Monte Carlo evaluation and side-by-side policy comparison.

Trial ``t`` of a run with seed ``S`` draws its realization from
``random.Random(mix_seed(S, t))``, where ``mix_seed`` is the SplitMix64
finalizer applied to ``S + (t + 1) * 0x9E3779B97F4A7C15`` (mod 2**64). Trials
are therefore independent of execution order, and sums use ``math.fsum`` so
reports are bitwise reproducible.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import asdict, dataclass
from itertools import accumulate

from .errors import BadArgument, PandoraError, PolicyShapeMismatch
from .forest import ForestSolver
from .line import Hyperbox, compute_phi_table, expected_payoff_line, run_line_policy
from .model import Instance, Realization
from .multiline import MultilineSolver, lines_of
from .oracle import best_na_value, best_pa_value, brute_force_optimal

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
POLICIES = ("line", "multiline", "forest", "truncated", "bestline")


def mix_seed(seed: int, trial: int) -> int:
    z = (seed + (trial + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Sampler:
    """Cached cumulative rows so repeated sampling stays cheap."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.order = instance.forest.topo_order
        self._cum: dict = {}

    def _cdf(self, b: str, s: int | None):
        key = (b, s)
        if key not in self._cum:
            row = [float(p) for p in self.instance.dist(b, s)]
            cum = list(accumulate(row))
            last = max(j for j, p in enumerate(row) if p > 0.0)
            for j in range(last, len(cum)):
                cum[j] = 1.0
            self._cum[key] = cum
        return self._cum[key]

    def sample(self, trial_seed: int) -> Realization:
        rng = random.Random(trial_seed)
        inst = self.instance
        out: dict[str, int] = {}
        for b in self.order:
            p = inst.parent(b)
            cum = self._cdf(b, None if p is None else out[p])
            u = rng.random()
            out[b] = bisect.bisect_right(cum, u)
        return Realization(out)


def sample_realization(instance: Instance, trial_seed: int) -> Realization:
    return Sampler(instance).sample(trial_seed)


@dataclass(frozen=True)
class SimReport:
    policy: str
    trials: int
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    seed: int

    def contains(self, value: float, sigmas: float = 1.96) -> bool:
        return abs(value - self.mean) <= sigmas * self.stderr + 1e-12

    def to_dict(self) -> dict:
        return asdict(self)


class _Runner:
    """A policy bound to an instance: ``payoff(realization)`` and ``exact()``."""

    def __init__(self, instance: Instance, policy: str, delta: float):
        self.policy = policy
        if policy == "line":
            comps = lines_of(instance)
            if len(comps) != 1:
                raise PolicyShapeMismatch("the line policy needs exactly one line")
            self.line = Hyperbox.from_instance(instance, comps[0])
            self.table = compute_phi_table(self.line)
            self._exact = lambda: expected_payoff_line(self.table)
            self.payoff = lambda r: run_line_policy(self.table, self.line, r).payoff
        elif policy == "multiline":
            solver = MultilineSolver(instance)
            self._exact = solver.expected_payoff
            self.payoff = lambda r: solver.run(r).payoff
        elif policy == "forest":
            solver = ForestSolver(instance)
            self._exact = solver.expected_payoff
            self.payoff = lambda r: solver.run(r).payoff
        elif policy == "truncated":
            from .static import truncate_lines

            solver = MultilineSolver(truncate_lines(instance, delta))
            self._exact = solver.expected_payoff
            self.payoff = lambda r: solver.run(r).payoff
        elif policy == "bestline":
            from .static import best_line_half_approx

            best = best_line_half_approx(instance, delta)
            self.line = Hyperbox.from_instance(instance, best.path)
            self.table = compute_phi_table(self.line)
            self._exact = lambda: best.value
            self.payoff = lambda r: run_line_policy(self.table, self.line, r).payoff
        else:
            raise BadArgument(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")

    def exact(self) -> float:
        return float(self._exact())


def monte_carlo_eval(instance: Instance, policy: str, trials: int, seed: int, delta: float = 0.05) -> SimReport:
    if trials <= 0:
        raise BadArgument("trials must be positive")
    runner = _Runner(instance, policy, delta)
    sampler = Sampler(instance)
    payoffs = [runner.payoff(sampler.sample(mix_seed(seed, t))) for t in range(trials)]
    mean = math.fsum(payoffs) / trials
    if trials > 1:
        var = math.fsum((p - mean) ** 2 for p in payoffs) / (trials - 1)
    else:
        var = 0.0
    se = math.sqrt(var / trials)
    return SimReport(policy, trials, mean, se, mean - 1.96 * se, mean + 1.96 * se, seed)


def exact_policy_value(instance: Instance, policy: str, delta: float = 0.05) -> float:
    return _Runner(instance, policy, delta).exact()


def _try(fn):
    try:
        return fn()
    except PandoraError as e:
        return {"skipped": e.code, "detail": e.detail}


def compare_policies(instance: Instance, trials: int, seed: int, delta: float = 0.05) -> dict:
    """Exact and simulated values of the index policy next to the oracle classes."""
    rows: dict = {}
    rows["fa_grv_exact"] = exact_policy_value(instance, "forest")
    rows["fa_grv_simulated"] = monte_carlo_eval(instance, "forest", trials, seed).to_dict()
    rows["oracle_fa"] = _try(lambda: brute_force_optimal(instance))
    rows["best_pa"] = _try(lambda: _pair(best_pa_value(instance)))
    rows["best_na"] = _try(lambda: _pair(best_na_value(instance)))
    if instance.static_transition:
        if all(len(instance.children(b)) <= 1 for b in instance.ids):
            rows["truncated"] = _try(lambda: exact_policy_value(instance, "truncated", delta))
        rows["best_line"] = _try(lambda: exact_policy_value(instance, "bestline", delta))
    return rows


def _pair(res):
    value, witness = res
    return {"value": float(value), "witness": list(witness)}
