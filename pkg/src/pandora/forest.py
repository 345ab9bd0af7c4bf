"""Forests: contract minimal trees bottom-up until only lines remain.

A branch vertex whose descendants never branch is the root of a minimal tree.
For each state of that vertex, its child lines form an independent multi-line
problem; that problem is replaced by one zero-cost synthetic box whose reward
is the capped value of the child lines (max over children). After enough
rounds every component is a line ending, possibly, in a synthetic box, and the
single-line table gives the reservation value of its first box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .boxes import NO_OPEN, RandomCostBox, expected_max_with, max_of_independent
from .errors import StateSpaceExplosion
from .line import Hyperbox, PhiTable, PolicyOutcome, TraceStep, beats, compute_phi_table, line_capped_law
from .model import Instance, Realization
from .multiline import MEMO_CAP

TIE_REL = 1e-12


@dataclass(frozen=True)
class SyntheticVertex:
    anchor: str
    members: tuple[str, ...]
    boxes: tuple[RandomCostBox, ...]

    @property
    def id(self) -> str:
        return f"^{self.anchor}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "anchor": self.anchor,
            "members": list(self.members),
            "per_state_atoms": [
                [[None if r == NO_OPEN else r, c, p] for r, c, p in b.atoms] for b in self.boxes
            ],
        }


@dataclass(frozen=True)
class MinimalTree:
    root: str
    vertices: tuple[str, ...]


@dataclass
class ContractedGraph:
    """Working forest: original boxes plus synthetic boxes hanging below contracted roots."""

    instance: Instance
    children: dict[str, tuple[str, ...]]
    roots: tuple[str, ...]
    synthetic: dict[str, SyntheticVertex] = field(default_factory=dict)

    @classmethod
    def of(cls, instance: Instance, roots=None) -> "ContractedGraph":
        roots = instance.forest.roots if roots is None else tuple(roots)
        children = {}
        for r in roots:
            for v in instance.forest.subtree(r):
                children[v] = instance.children(v)
        return cls(instance, children, roots)

    def vertices(self):
        return list(self.children)

    def walk(self, b: str) -> tuple[str, ...]:
        """The path from b down to the first vertex without exactly one child."""
        path = [b]
        while len(self.children[path[-1]]) == 1:
            path.append(self.children[path[-1]][0])
        return tuple(path)

    def line(self, b: str) -> Hyperbox:
        path = self.walk(b)
        end = self.synthetic.get(path[-1])
        return Hyperbox.from_instance(
            self.instance, path,
            tail=None if end is None else end.boxes,
        )

    def is_lines(self) -> bool:
        return all(len(c) <= 1 for c in self.children.values())


def find_minimal_trees(graph: ContractedGraph) -> list[MinimalTree]:
    """Every branch vertex with no branching below it, with its remaining subtree."""
    out = []
    for v in graph.vertices():
        if len(graph.children[v]) < 2:
            continue
        stack, verts, ok = list(graph.children[v]), [v], True
        while stack:
            u = stack.pop()
            verts.append(u)
            if len(graph.children[u]) > 1:
                ok = False
                break
            stack.extend(graph.children[u])
        if ok:
            out.append(MinimalTree(v, tuple(verts)))
    return out


def contract_minimal_tree(graph: ContractedGraph, tree: MinimalTree, tables: dict | None = None) -> SyntheticVertex:
    """Replace the child lines of ``tree.root`` by one synthetic box per root state.

    ``tables`` optionally caches child-line tables by first box id.
    """
    inst = graph.instance
    k = inst.k
    laws_per_child = []
    members: list[str] = []
    for c in graph.children[tree.root]:
        line = graph.line(c)
        members.extend(line.ids)
        end = graph.synthetic.get(line.ids[-1])
        if end is not None:
            members.extend(end.members)
        t = tables.get(c) if tables is not None else None
        if t is None:
            t = compute_phi_table(line)
            if tables is not None:
                tables[c] = t
        laws_per_child.append(t)
    boxes = []
    for y in range(k):
        laws = [line_capped_law(t, 0, y + 1) for t in laws_per_child]
        law = max_of_independent(laws)
        boxes.append(RandomCostBox.from_atoms((r, 0.0, p) for r, p in law.items()))
    synth = SyntheticVertex(tree.root, tuple(members), tuple(boxes))
    graph.synthetic[tree.root] = synth
    graph.children[tree.root] = ()
    for v in members:
        graph.children.pop(v, None)
    return synth


def contract_forest(graph: ContractedGraph, tables: dict | None = None) -> list[SyntheticVertex]:
    """Run contraction rounds until only lines remain; returns synthetic boxes in creation order."""
    made = []
    rounds = 0
    while True:
        trees = find_minimal_trees(graph)
        if not trees:
            break
        for t in trees:
            made.append(contract_minimal_tree(graph, t, tables))
        rounds += 1
        if rounds > len(graph.instance.ids) + 1:
            raise AssertionError("contraction failed to terminate")
    return made


def root_equivalent_reward(graph: ContractedGraph, r: str, x: float, dist) -> float:
    """max{x, E[max(R_r, x)] - c_r, E[max(R_r, x, R_hat)] - c_r - c_hat} for a contracted root."""
    inst = graph.instance
    vals = inst.grid.values
    c = inst.cost(r)
    synth = graph.synthetic.get(r)
    alone = -c + math.fsum(float(p) * max(vals[y], x) for y, p in enumerate(dist))
    best = max(x, alone)
    if synth is not None:
        both = -c
        for y, p in enumerate(dist):
            if p == 0.0:
                continue
            box = synth.boxes[y]
            both += float(p) * (expected_max_with(box.reward_law(), max(vals[y], x)) - box.expected_cost)
        best = max(best, both)
    return best


class ForestSolver:
    """Reservation values for every (box, parent state); contraction work is shared."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.graph = ContractedGraph.of(instance)
        self.tables: dict[str, PhiTable] = {}
        self.synthetics = contract_forest(self.graph, self.tables)
        self._lines: dict[str, Hyperbox] = {}

    def line_from(self, b: str) -> Hyperbox:
        """The line the subtree rooted at b reduces to: path to the first branch plus its synthetic tail."""
        if b not in self._lines:
            inst = self.instance
            path = [b]
            while len(inst.children(path[-1])) == 1:
                path.append(inst.children(path[-1])[0])
            end = path[-1]
            tail = None
            if inst.children(end):
                tail = self._synthetic_for(end).boxes
            self._lines[b] = Hyperbox.from_instance(inst, path, tail=tail)
        return self._lines[b]

    def _synthetic_for(self, v: str) -> SyntheticVertex:
        for s in self.synthetics:
            if s.anchor == v:
                return s
        raise KeyError(v)

    def table(self, b: str) -> PhiTable:
        if b not in self.tables:
            self.tables[b] = compute_phi_table(self.line_from(b))
        return self.tables[b]

    def grv(self, b: str, parent_state: int | None) -> float:
        return self.table(b).grv(0, parent_state)

    def capped_law(self, b: str, parent_state: int | None) -> dict[float, float]:
        return line_capped_law(self.table(b), 0, 0 if parent_state is None else parent_state + 1)

    def choose(self, avail: list[tuple[str, int | None]], x: float):
        best = None
        best_sigma = NO_OPEN
        for b, s in sorted(avail):
            sig = self.grv(b, s)
            if best is None or sig - best_sigma > TIE_REL * max(1.0, abs(sig)):
                best, best_sigma = (b, s), sig
        if best is None or not beats(best_sigma, x):
            return None, best_sigma
        return best, best_sigma

    def run(self, realization: Realization | dict) -> PolicyOutcome:
        inst = self.instance
        assign = realization.assignment if isinstance(realization, Realization) else realization
        vals = inst.grid.values
        avail = [(r, None) for r in inst.forest.roots]
        comp_of = {}
        for j, comp in enumerate(inst.forest.components()):
            for v in comp:
                comp_of[v] = j
        x, cost = 0.0, 0.0
        opened, trace = [], []
        while True:
            pick, sig = self.choose(avail, x)
            if pick is None:
                break
            b, _ = pick
            avail.remove(pick)
            y = assign[b]
            x = max(x, vals[y])
            cost += inst.cost(b)
            opened.append(b)
            avail.extend((c, y) for c in inst.children(b))
            trace.append(TraceStep(comp_of[b], b, sig, vals[y], x, cost))
        return PolicyOutcome(tuple(opened), tuple(trace), x, cost)

    def expected_payoff(self, memo_cap: int = MEMO_CAP) -> float:
        inst = self.instance
        vals = inst.grid.values
        memo: dict = {}

        def V(avail: tuple, x: float) -> float:
            key = (avail, x)
            if key in memo:
                return memo[key]
            if len(memo) >= memo_cap:
                raise StateSpaceExplosion(f"more than {memo_cap} frontier states")
            pick, _ = self.choose(list(avail), x)
            if pick is None:
                out = x
            else:
                b, s = pick
                rest = [a for a in avail if a != pick]
                out = -inst.cost(b)
                for y, p in enumerate(inst.dist(b, s)):
                    if p == 0.0:
                        continue
                    nxt = tuple(sorted(rest + [(c, y) for c in inst.children(b)], key=_avail_key))
                    out += float(p) * V(nxt, max(x, vals[y]))
            memo[key] = out
            return out

        start = tuple(sorted(((r, None) for r in inst.forest.roots), key=_avail_key))
        return V(start, 0.0)

    def amortized_value(self, x: float = 0.0) -> float:
        """Closed form E[max(x, max over roots of capped values)]."""
        laws = [self.capped_law(r, None) for r in self.instance.forest.roots]
        if not laws:
            return x
        return expected_max_with(max_of_independent(laws), x)


def _avail_key(a):
    b, s = a
    return (b, -1 if s is None else s)


def grv_forest(instance: Instance, opened=(), info=None, solver: ForestSolver | None = None) -> dict[str, float]:
    """Reservation value of every available box given the opened set and observed states."""
    solver = solver or ForestSolver(instance)
    info = info or {}
    opened = set(opened)
    out = {}
    for b in instance.ids:
        if b in opened:
            continue
        p = instance.parent(b)
        if p is None:
            out[b] = solver.grv(b, None)
        elif p in opened:
            out[b] = solver.grv(b, info[p])
    return out


def run_forest_policy(instance: Instance, realization, solver: ForestSolver | None = None) -> PolicyOutcome:
    return (solver or ForestSolver(instance)).run(realization)


def expected_payoff_forest(instance: Instance, memo_cap: int = MEMO_CAP) -> float:
    if instance.n == 0:
        return 0.0
    return ForestSolver(instance).expected_payoff(memo_cap)
