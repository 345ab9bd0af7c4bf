"""Random-cost boxes and small helpers for discrete reward laws.

A random-cost box is a list of ``(reward, cost, prob)`` atoms: opening it pays
the (random) cost and reveals the (correlated) reward. ``NO_OPEN`` marks the
outcome where nothing behind the box gets opened; it never beats any max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

NO_OPEN = -math.inf
COST_DIGITS = 12
PROB_EPS = 1e-15


def merge_atoms(atoms: Iterable[tuple[float, float, float]]) -> tuple[tuple[float, float, float], ...]:
    """Merge atoms on identical (reward, cost), costs rounded to 1e-12; sorted output."""
    acc: dict[tuple[float, float], float] = {}
    for r, c, p in atoms:
        if p <= 0.0:
            continue
        key = (r, round(c, COST_DIGITS) + 0.0)
        acc[key] = acc.get(key, 0.0) + p
    return tuple((r, c, p) for (r, c), p in sorted(acc.items()))


@dataclass(frozen=True)
class RandomCostBox:
    atoms: tuple[tuple[float, float, float], ...]

    @classmethod
    def from_atoms(cls, atoms) -> "RandomCostBox":
        return cls(merge_atoms(atoms))

    @classmethod
    def point(cls, reward: float, cost: float = 0.0) -> "RandomCostBox":
        return cls(((reward, cost, 1.0),))

    @classmethod
    def nothing(cls) -> "RandomCostBox":
        return cls(((NO_OPEN, 0.0, 1.0),))

    @property
    def total_prob(self) -> float:
        return math.fsum(p for _, _, p in self.atoms)

    @property
    def expected_cost(self) -> float:
        return math.fsum(p * c for _, c, p in self.atoms)

    def is_nothing(self) -> bool:
        return all(r == NO_OPEN and c == 0.0 for r, c, _ in self.atoms)

    def expected_utility(self, x: float) -> float:
        """E[max(x, R) - c]: value of opening the box when the current max is x."""
        return math.fsum(p * (max(x, r) - c) for r, c, p in self.atoms)

    def reward_law(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for r, _, p in self.atoms:
            out[r] = out.get(r, 0.0) + p
        return out

    def utility_law(self, x: float = 0.0) -> dict[float, float]:
        """Distribution of max(x, R) - c."""
        out: dict[float, float] = {}
        for r, c, p in self.atoms:
            u = max(x, r) - c
            out[u] = out.get(u, 0.0) + p
        return out

    def reservation_value(self) -> float:
        """Smallest sigma with E[max(sigma, R)] - E[c] = sigma, i.e. E[(R - sigma)+] = E[c]."""
        return reservation_value(self.reward_law(), self.expected_cost)

    def amortized(self) -> "RandomCostBox":
        """Zero-cost box with reward min(sigma, R); same value E[max(x, .)] for x <= sigma."""
        sigma = self.reservation_value()
        return RandomCostBox.from_atoms((min(sigma, r), 0.0, p) for r, _, p in self.atoms)


def reservation_value(law: Mapping[float, float], cost: float) -> float:
    """Smallest sigma solving E[(Z - sigma)+] = cost for a discrete law of Z.

    ``NO_OPEN`` atoms contribute nothing. With zero cost the answer is the top
    of the support (``NO_OPEN`` when the support is empty).
    """
    supp = sorted(v for v, p in law.items() if p > 0.0 and v != NO_OPEN)
    if not supp:
        return NO_OPEN
    if cost <= 0.0:
        return supp[-1]
    # walk down the support; on [supp[j], supp[j+1]] the gap function is linear
    above = 0.0
    first_moment = 0.0
    for j in range(len(supp) - 1, -1, -1):
        v = supp[j]
        above += law[v]
        first_moment += law[v] * v
        lo = supp[j - 1] if j > 0 else -math.inf
        # gap(s) = first_moment - above * s on [lo, v]
        g_lo = first_moment - above * lo if lo != -math.inf else math.inf
        if g_lo >= cost:
            return (first_moment - cost) / above
    raise AssertionError("unreachable")


def law_cdf(law: Mapping[float, float], v: float) -> float:
    return math.fsum(p for u, p in law.items() if u <= v)


def max_of_independent(laws: list[Mapping[float, float]]) -> dict[float, float]:
    """Law of the max of independent discrete variables (product of CDFs)."""
    if not laws:
        return {NO_OPEN: 1.0}
    supp = sorted({v for law in laws for v in law})
    out: dict[float, float] = {}
    prev = 0.0
    for v in supp:
        cdf = 1.0
        for law in laws:
            cdf *= law_cdf(law, v)
        if cdf - prev > PROB_EPS:
            out[v] = cdf - prev
        prev = cdf
    return out


def cap_law(law: Mapping[float, float], cap: float) -> dict[float, float]:
    out: dict[float, float] = {}
    for v, p in law.items():
        u = min(v, cap)
        out[u] = out.get(u, 0.0) + p
    return out


def mix_laws(weighted: Iterable[tuple[float, Mapping[float, float]]]) -> dict[float, float]:
    out: dict[float, float] = {}
    for w, law in weighted:
        if w <= 0.0:
            continue
        for v, p in law.items():
            out[v] = out.get(v, 0.0) + w * p
    return out


def expected_max_with(law: Mapping[float, float], x: float) -> float:
    """E[max(x, Z)]."""
    return math.fsum(p * max(x, v) for v, p in law.items())
