"""Several independent lines: index policy on the latest reservation value of each line.

Each line keeps its own table. The policy probes the line whose next box has
the highest reservation value given that line's last observation, and stops
once the current max reaches every line's index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

from .boxes import NO_OPEN, RandomCostBox, max_of_independent
from .errors import PolicyShapeMismatch, StateSpaceExplosion
from .line import (
    Hyperbox,
    PhiTable,
    PolicyOutcome,
    TraceStep,
    beats,
    compute_phi_table,
    line_capped_law,
)
from .model import Instance, Realization

MEMO_CAP = 10**7


def lines_of(instance: Instance) -> list[tuple[str, ...]]:
    """Split a union-of-lines instance into its lines, in root order."""
    out = []
    for comp in instance.forest.components():
        if any(len(instance.children(b)) > 1 for b in comp):
            raise PolicyShapeMismatch(f"component rooted at {comp[0]!r} branches")
        out.append(comp)
    return out


def contract_line(line: Hyperbox, start_dist=None, x: float = 0.0, table: PhiTable | None = None) -> RandomCostBox:
    """Trajectory contraction: one atom (max reward, total cost, prob) per stopped path.

    The stopping rule is the optimal one for outside value ``x``; a line that is
    never entered gives the single ``NO_OPEN`` atom.
    """
    if table is None:
        table = compute_phi_table(line, start_dist)
    return RandomCostBox(tuple(table.entry_atoms(x, None, 0)))


def equivalent_box(line: Hyperbox, start_dist=None, table: PhiTable | None = None) -> RandomCostBox:
    """Zero-cost box whose reward is the capped value of the whole line.

    For every outside value x, E[max(x, reward)] equals the line's optimal value.
    """
    if table is None:
        table = compute_phi_table(line, start_dist)
    law = line_capped_law(table, 0, 0)
    return RandomCostBox.from_atoms((r, 0.0, p) for r, p in law.items())


def contract_lines(boxes: list[RandomCostBox]) -> RandomCostBox:
    """Equivalent zero-cost box of several independent capped boxes (max of rewards)."""
    laws = [b.reward_law() for b in boxes]
    law = max_of_independent(laws)
    return RandomCostBox.from_atoms((r, 0.0, p) for r, p in law.items())


@dataclass
class FrontierState:
    positions: list[int]
    last: list[int | None]
    x: float = 0.0
    cost: float = 0.0

    @classmethod
    def fresh(cls, q: int) -> "FrontierState":
        return cls([0] * q, [None] * q)


class MultilineSolver:
    def __init__(self, instance: Instance):
        self.instance = instance
        self.lines = [Hyperbox.from_instance(instance, ids) for ids in lines_of(instance)]
        self.tables = [compute_phi_table(h) for h in self.lines]

    def current_grv(self, state: FrontierState) -> list[float]:
        return current_grv(state, self.tables)

    def choose(self, state: FrontierState) -> int | None:
        sig = self.current_grv(state)
        best = None
        for j, s in enumerate(sig):
            if best is None or s > sig[best]:
                best = j
        if best is None or not beats(sig[best], state.x):
            return None
        return best

    def run(self, realization: Realization | dict) -> PolicyOutcome:
        assign = realization.assignment if isinstance(realization, Realization) else realization
        vals = self.instance.grid.values
        st = FrontierState.fresh(len(self.lines))
        opened, trace = [], []
        while True:
            sig = self.current_grv(st)
            j = self.choose(st)
            if j is None:
                break
            line = self.lines[j]
            i = st.positions[j]
            b = line.ids[i]
            y = assign[b]
            st.x = max(st.x, vals[y])
            st.cost += line.costs[i]
            st.positions[j] += 1
            st.last[j] = y
            opened.append(b)
            trace.append(TraceStep(j, b, sig[j], vals[y], st.x, st.cost))
        return PolicyOutcome(tuple(opened), tuple(trace), st.x, st.cost)

    def expected_payoff(self, memo_cap: int = MEMO_CAP) -> float:
        vals = self.instance.grid.values
        memo: dict = {}

        def V(positions: tuple, last: tuple, x: float) -> float:
            key = (positions, last, x)
            if key in memo:
                return memo[key]
            if len(memo) >= memo_cap:
                raise StateSpaceExplosion(f"more than {memo_cap} frontier states")
            st = FrontierState(list(positions), list(last), x)
            j = self.choose(st)
            if j is None:
                out = x
            else:
                line = self.lines[j]
                i = positions[j]
                dist = line.dist(i, 0 if last[j] is None else last[j] + 1)
                out = -line.costs[i]
                for y, p in enumerate(dist):
                    if p == 0.0:
                        continue
                    np_ = positions[:j] + (i + 1,) + positions[j + 1:]
                    nl = last[:j] + (y,) + last[j + 1:]
                    out += float(p) * V(np_, nl, max(x, vals[y]))
            memo[key] = out
            return out

        q = len(self.lines)
        return V((0,) * q, (None,) * q, 0.0)

    def equivalent_box(self) -> RandomCostBox:
        return contract_lines([equivalent_box(h, table=t) for h, t in zip(self.lines, self.tables)])


def current_grv(state: FrontierState, tables: list[PhiTable]) -> list[float]:
    """Per line: reservation value of its next box given its last observation; finished lines get NO_OPEN."""
    out = []
    for j, t in enumerate(tables):
        i = state.positions[j]
        out.append(NO_OPEN if i >= t.n else t.grv(i, state.last[j]))
    return out


def run_multiline_policy(instance: Instance, realization, solver: MultilineSolver | None = None) -> PolicyOutcome:
    return (solver or MultilineSolver(instance)).run(realization)


def expected_payoff_multiline(instance: Instance, memo_cap: int = MEMO_CAP) -> float:
    return MultilineSolver(instance).expected_payoff(memo_cap)


def _optimal_stop_in_order(boxes, x: float) -> float:
    """Best adaptive-stopping utility for a fixed order of random-cost boxes.

    ``boxes`` is a list of callables; each takes the tuple of atom indices
    realized so far and returns the RandomCostBox to open next.
    """

    def V(t: int, x: float, hist: tuple) -> float:
        if t == len(boxes):
            return x
        box = boxes[t](hist)
        cont = 0.0
        for a, (r, c, p) in enumerate(box.atoms):
            cont += p * (V(t + 1, max(x, r), hist + (a,)) - c)
        return max(x, cont)

    return V(0, x, ())


def exchange_utilities(A: RandomCostBox, B: RandomCostBox, C_given, x: float = 0.0) -> tuple[float, float]:
    """Exact utilities of the orders A, B, C and B, A, C with optimal stopping.

    ``C_given(a, b)`` returns C's random-cost box when A realized atom ``a`` and
    B realized atom ``b``; C may only be opened after both.
    """

    def first(box):
        return lambda hist: box

    abc = [first(A), first(B), lambda h: C_given(h[0], h[1])]
    bac = [first(B), first(A), lambda h: C_given(h[1], h[0])]
    return _optimal_stop_in_order(abc, x), _optimal_stop_in_order(bac, x)


def exchange_hypotheses_hold(A: RandomCostBox, B: RandomCostBox, C_given, tol: float = 1e-12) -> bool:
    sa, sb = A.reservation_value(), B.reservation_value()
    if sa < sb - tol:
        return False
    for a, b in product(range(len(A.atoms)), range(len(B.atoms))):
        if C_given(a, b).reservation_value() > sb + tol:
            return False
    return True
