"""Single-line solver: equivalent-reward table, reservation values, optimal stopping.

The table stores, for every box position ``i``, conditioning slot and current
max ``x`` on the x-grid, the optimal continuation value together with the joint
law of (future max reward, future cost) when continuing.

Slot 0 means "no parent observation" (the line's own start distribution); slot
``j + 1`` means the previous box realized grid state ``j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import NO_OPEN, RandomCostBox, merge_atoms
from .errors import AtomExplosion, BadArgument
from .model import Instance, Realization

ATOM_CAP = 10**6
TIE_TOL = 1e-9
START = None

_STOP_ATOMS = ((NO_OPEN, 0.0, 1.0),)


def _strictly_above(z: float, x: float) -> bool:
    # strict comparison that ignores probability-sum rounding
    return z - x > 1e-12 * max(1.0, abs(x))


def beats(sigma: float, x: float) -> bool:
    """True when an index sigma strictly beats the current max x (ties stop)."""
    if sigma == NO_OPEN:
        return False
    return sigma - x > TIE_TOL * max(1.0, abs(sigma))


@dataclass(frozen=True, eq=False)
class Hyperbox:
    """A directed path of boxes, optionally followed by a per-state random-cost tail.

    ``transitions[i]`` (i >= 1) is the law of box i given box i-1's state.
    ``transitions[0]`` is the entry matrix from an outside parent, or None.
    ``tail[j]`` is the box revealed after the last box when it realized state j.
    """

    ids: tuple[str, ...]
    costs: tuple[float, ...]
    values: tuple[float, ...]
    transitions: tuple[np.ndarray | None, ...]
    start_dist: np.ndarray | None = None
    tail: tuple[RandomCostBox, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def k(self) -> int:
        return len(self.values)

    @classmethod
    def from_instance(cls, instance: Instance, ids, start_dist=None, tail=None) -> "Hyperbox":
        ids = tuple(ids)
        for a, b in zip(ids, ids[1:]):
            if instance.parent(b) != a:
                raise BadArgument(f"{a!r} -> {b!r} is not an edge of the instance")
        trans = tuple(instance.transition_into(b) for b in ids)
        if start_dist is None and instance.parent(ids[0]) is None:
            start_dist = instance.boxes[ids[0]].root_dist
        return cls(
            ids=ids,
            costs=tuple(instance.cost(b) for b in ids),
            values=instance.grid.values,
            transitions=trans,
            start_dist=None if start_dist is None else np.asarray(start_dist, dtype=float),
            tail=None if tail is None else tuple(tail),
        )

    def truncated(self, length: int) -> "Hyperbox":
        return Hyperbox(
            self.ids[:length], self.costs[:length], self.values,
            self.transitions[:length], self.start_dist, None,
        )

    def dist(self, i: int, slot: int) -> np.ndarray | None:
        if slot == 0:
            return self.start_dist if i == 0 else None
        m = self.transitions[i]
        return None if m is None else m[slot - 1]


@dataclass
class PhiTable:
    line: Hyperbox
    xgrid: np.ndarray
    phi: np.ndarray
    open: np.ndarray
    atoms: list = field(repr=False)
    _grv_memo: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.line.n

    def xindex(self, x: float) -> int:
        j = int(np.searchsorted(self.xgrid, x))
        if j >= len(self.xgrid) or self.xgrid[j] != x:
            raise BadArgument(f"x = {x!r} is not on the x-grid")
        return j

    @staticmethod
    def slot(s: int | None) -> int:
        return 0 if s is None else s + 1

    def value(self, x: float, s: int | None, i: int) -> float:
        return float(self.phi[i, self.slot(s), self.xindex(x)])

    def is_open(self, x: float, s: int | None, i: int) -> bool:
        return bool(self.open[i, self.slot(s), self.xindex(x)])

    def entry_atoms(self, x: float, s: int | None, i: int):
        return self.atoms[i][self.slot(s)][self.xindex(x)]

    # -- exact local linear pieces, for reservation values off the grid --

    def _tail_local(self, x: float, y: int) -> tuple[float, float]:
        box = self.line.tail[y]
        eu = box.expected_utility(x)
        if _strictly_above(eu, x):
            slope = math.fsum(p for r, _, p in box.atoms if r <= x)
            return eu, slope
        return x, 1.0

    def _cont_local(self, i: int, slot: int, x: float, memo: dict) -> tuple[float, float]:
        """Value and right slope of the continuation z(x) at position i."""
        key = (i, slot, x)
        if key in memo:
            return memo[key]
        line = self.line
        dist = line.dist(i, slot)
        val = -line.costs[i]
        slope = 0.0
        for y, p in enumerate(dist):
            if p == 0.0:
                continue
            v = line.values[y]
            arg = v if v > x else x
            if i + 1 < line.n:
                fv, fs = self._phi_local(i + 1, y + 1, arg, memo)
            elif line.tail is not None:
                fv, fs = self._tail_local(arg, y)
            else:
                fv, fs = arg, 1.0
            val += p * fv
            if v <= x:
                slope += p * fs
        memo[key] = (val, slope)
        return val, slope

    def _phi_local(self, i: int, slot: int, x: float, memo: dict) -> tuple[float, float]:
        z, s = self._cont_local(i, slot, x, memo)
        return (z, s) if _strictly_above(z, x) else (x, 1.0)

    def local_linear(self, x: float, s: int | None, i: int) -> tuple[float, float]:
        """Φ(x, s, i) and its right derivative in x, for any real x."""
        v, sl = self._phi_local(i, self.slot(s), float(x), {})
        return float(v), float(sl)

    def grv(self, i: int, s: int | None) -> float:
        """Smallest fixed point sigma of x -> Φ(x, s, i)."""
        slot = self.slot(s)
        key = (i, slot)
        if key in self._grv_memo:
            return self._grv_memo[key]
        if self.line.dist(i, slot) is None:
            raise BadArgument(f"no distribution for position {i} under slot {slot}")
        row = self.open[i, slot]
        stops = np.flatnonzero(~row)
        j = int(stops[0]) if len(stops) else len(row)
        memo: dict = {}
        if j > 0:
            x = float(self.xgrid[j - 1])
        else:
            x = float(self.xgrid[0]) - 1.0
            z0, _ = self._cont_local(i, slot, x, memo)
            if z0 <= x:
                x = z0 - 1.0
        for _ in range(10_000):
            z, sl = self._cont_local(i, slot, x, memo)
            h = z - x
            if h <= 1e-12 * max(1.0, abs(x)) or sl >= 1.0:
                break
            x = x + h / (1.0 - sl)
        x = float(x)
        self._grv_memo[key] = x
        return x

    def to_json(self) -> dict:
        entries = []
        k = self.line.k
        for i in range(self.n):
            for slot in range(k + 1):
                if self.line.dist(i, slot) is None:
                    continue
                for xi, x in enumerate(self.xgrid):
                    entries.append({
                        "x": float(x),
                        "s": None if slot == 0 else self.line.values[slot - 1],
                        "i": i + 1,
                        "phi": float(self.phi[i, slot, xi]),
                        "open": bool(self.open[i, slot, xi]),
                        "atoms": [[None if r == NO_OPEN else r, c, p]
                                  for r, c, p in self.atoms[i][slot][xi]],
                    })
        return {"entries": entries}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def x_grid(values) -> np.ndarray:
    return np.array(sorted(set(float(v) for v in values) | {0.0}))


def compute_phi_table(line: Hyperbox, start_dist=None, atom_cap: int = ATOM_CAP) -> PhiTable:
    """Fill the table backwards from the last box."""
    if start_dist is not None:
        line = Hyperbox(line.ids, line.costs, line.values, line.transitions,
                        np.asarray(start_dist, dtype=float), line.tail)
    n, k = line.n, line.k
    X = x_grid(line.values)
    m = len(X)
    xi_of = {float(v): j for j, v in enumerate(X)}
    vidx = [xi_of[float(v)] for v in line.values]

    phi = np.full((n, k + 1, m), np.nan)
    opened = np.zeros((n, k + 1, m), dtype=bool)
    atoms: list = [[[None] * m for _ in range(k + 1)] for _ in range(n)]

    # after the last box: either the tail or nothing
    def after_last(xj: int, y: int):
        x = float(X[xj])
        if line.tail is None:
            return x, _STOP_ATOMS
        box = line.tail[y]
        eu = box.expected_utility(x)
        if _strictly_above(eu, x):
            return eu, box.atoms
        return x, _STOP_ATOMS

    for i in range(n - 1, -1, -1):
        c = line.costs[i]
        for slot in range(k + 1):
            dist = line.dist(i, slot)
            if dist is None:
                continue
            support = [(y, float(p)) for y, p in enumerate(dist) if p > 0.0]
            for xj in range(m):
                x = float(X[xj])
                z = -c
                acc = []
                for y, p in support:
                    nj = max(xj, vidx[y])
                    if i + 1 < n:
                        fv = phi[i + 1, y + 1, nj]
                        fa = atoms[i + 1][y + 1][nj]
                    else:
                        fv, fa = after_last(nj, y)
                    z += p * fv
                    vy = line.values[y]
                    acc.extend((max(vy, r), cc + c, p * q) for r, cc, q in fa)
                if _strictly_above(z, x):
                    merged = merge_atoms(acc)
                    if len(merged) > atom_cap:
                        raise AtomExplosion(f"{len(merged)} atoms at position {i + 1}")
                    phi[i, slot, xj] = z
                    opened[i, slot, xj] = True
                    atoms[i][slot][xj] = merged
                else:
                    phi[i, slot, xj] = x
                    atoms[i][slot][xj] = _STOP_ATOMS
    phi.setflags(write=False)
    opened.setflags(write=False)
    return PhiTable(line, X, phi, opened, atoms)


def grv(table: PhiTable, i: int, s: int | None) -> float:
    """Reservation value of position i (0-based) given the previous state s (None: start)."""
    return table.grv(i, s)


@dataclass(frozen=True)
class TraceStep:
    line: int
    box: str
    grv: float
    observed: float
    x_after: float
    cost_so_far: float

    def to_dict(self) -> dict:
        return {
            "line": self.line, "box": self.box, "grv": self.grv,
            "observed": self.observed, "x_after": self.x_after,
            "cost_so_far": self.cost_so_far,
        }


@dataclass(frozen=True)
class PolicyOutcome:
    opened: tuple[str, ...]
    trace: tuple[TraceStep, ...]
    max_reward: float
    total_cost: float

    @property
    def payoff(self) -> float:
        return self.max_reward - self.total_cost

    def to_dict(self) -> dict:
        return {
            "trace": [t.to_dict() for t in self.trace],
            "opened": list(self.opened),
            "max_reward": self.max_reward,
            "total_cost": self.total_cost,
            "payoff": self.payoff,
        }


def run_line_policy(table: PhiTable, line: Hyperbox, realization: Realization | dict) -> PolicyOutcome:
    """Open boxes front to back while the next reservation value beats the current max."""
    assign = realization.assignment if isinstance(realization, Realization) else realization
    x, cost, s = 0.0, 0.0, None
    opened, trace = [], []
    for i, b in enumerate(line.ids):
        sigma = table.grv(i, s)
        if not beats(sigma, x):
            break
        s = assign[b]
        x = max(x, line.values[s])
        cost += line.costs[i]
        opened.append(b)
        trace.append(TraceStep(0, b, sigma, line.values[s], x, cost))
    return PolicyOutcome(tuple(opened), tuple(trace), x, cost)


def expected_payoff_line(table: PhiTable) -> float:
    return table.value(0.0, None, 0)


def line_capped_law(table: PhiTable, i: int, slot: int, memo: dict | None = None) -> dict[float, float]:
    """Law of the capped value min(sigma_i, max(R_i, capped value of the rest)).

    This is the zero-cost box equivalent to the suffix starting at position i
    under the given conditioning slot.
    """
    memo = {} if memo is None else memo
    key = (i, slot)
    if key in memo:
        return memo[key]
    line = table.line
    sigma = table.grv(i, None if slot == 0 else slot - 1)
    out: dict[float, float] = {}
    for y, p in enumerate(line.dist(i, slot)):
        if p == 0.0:
            continue
        vy = line.values[y]
        if i + 1 < line.n:
            rest = line_capped_law(table, i + 1, y + 1, memo)
        elif line.tail is not None:
            rest = line.tail[y].reward_law()
        else:
            rest = {NO_OPEN: 1.0}
        for r, q in rest.items():
            u = min(sigma, max(vy, r))
            out[u] = out.get(u, 0.0) + p * q
    memo[key] = out
    return out
