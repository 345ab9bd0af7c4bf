"""Instance data model: value grid, boxes, forest precedence, per-edge transitions.

Instances are immutable once validated. Reward states are grid indices; a
box's reward is ``grid.values[index]``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadShapeParams, violation_error

PROB_TOL = 1e-12
PROPAGATED_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValueGrid:
    values: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def top(self) -> float:
        return self.values[-1]

    def xgrid(self) -> tuple[float, ...]:
        """Current-max grid used by the solvers: the outside option 0 plus every value."""
        return tuple(sorted(set(self.values) | {0.0}))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    id: str
    rows: np.ndarray

    def row(self, s: int) -> np.ndarray:
        return self.rows[s]


@dataclass(frozen=True, eq=False)
class BoxSpec:
    id: str
    cost: float
    root_dist: np.ndarray | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    transition: str


@dataclass(frozen=True, eq=False)
class PrecedenceForest:
    vertices: tuple[BoxSpec, ...]
    edges: tuple[Edge, ...]
    parent: Mapping[str, str | None] = field(repr=False)
    children: Mapping[str, tuple[str, ...]] = field(repr=False)
    topo_order: tuple[str, ...] = field(repr=False)

    @property
    def roots(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.vertices if self.parent[b.id] is None)

    def components(self) -> list[tuple[str, ...]]:
        """Trees in root order; each tree lists its boxes in DFS preorder."""
        out = []
        for r in self.roots:
            stack, comp = [r], []
            while stack:
                v = stack.pop()
                comp.append(v)
                stack.extend(reversed(self.children[v]))
            out.append(tuple(comp))
        return out

    def subtree(self, b: str) -> tuple[str, ...]:
        stack, out = [b], []
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return tuple(out)


@dataclass(frozen=True, eq=False)
class Instance:
    grid: ValueGrid
    forest: PrecedenceForest
    transitions: Mapping[str, TransitionMatrix]
    static_transition: bool
    boxes: Mapping[str, BoxSpec] = field(repr=False)
    edge_into: Mapping[str, Edge] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.forest.vertices)

    @property
    def k(self) -> int:
        return self.grid.k

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.forest.vertices)

    def cost(self, b: str) -> float:
        return self.boxes[b].cost

    def parent(self, b: str) -> str | None:
        return self.forest.parent[b]

    def children(self, b: str) -> tuple[str, ...]:
        return self.forest.children[b]

    def transition_into(self, b: str) -> np.ndarray | None:
        e = self.edge_into.get(b)
        return None if e is None else self.transitions[e.transition].rows

    def dist(self, b: str, parent_state: int | None) -> np.ndarray:
        """Reward distribution of ``b`` given its parent's realized state (None for roots)."""
        if parent_state is None:
            return self.boxes[b].root_dist
        return self.transition_into(b)[parent_state]

    def to_dict(self) -> dict:
        return {
            "values": list(self.grid.values),
            "boxes": [
                {
                    "id": b.id,
                    "cost": b.cost,
                    "root_dist": None if b.root_dist is None else b.root_dist.tolist(),
                }
                for b in self.forest.vertices
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "transition": e.transition}
                for e in self.forest.edges
            ],
            "transitions": {tid: t.rows.tolist() for tid, t in self.transitions.items()},
        }


@dataclass(frozen=True)
class Realization:
    assignment: Mapping[str, int]

    def __getitem__(self, b: str) -> int:
        return self.assignment[b]


def _check_dist(vec, k: int, what: str, violations: list) -> np.ndarray | None:
    try:
        arr = np.array(vec, dtype=float)
    except (TypeError, ValueError):
        violations.append(("BadDistribution", f"{what}: not numeric"))
        return None
    if arr.shape != (k,):
        violations.append(("BadDistribution", f"{what}: expected length {k}, got shape {arr.shape}"))
        return None
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        violations.append(("BadDistribution", f"{what}: entries must lie in [0, 1]"))
        return None
    if abs(arr.sum() - 1.0) > PROB_TOL:
        violations.append(("BadDistribution", f"{what}: sums to {float(arr.sum()):.12g}"))
        return None
    return arr


def _is_static(edges: Sequence[Edge], transitions: Mapping[str, np.ndarray], parent, roots_of) -> bool:
    per_comp: dict[str, np.ndarray] = {}
    for e in edges:
        comp = roots_of[e.dst]
        mat = transitions[e.transition]
        if comp not in per_comp:
            per_comp[comp] = mat
        elif not np.array_equal(per_comp[comp], mat):
            return False
    return True


def validate_instance(raw) -> Instance:
    """Validate Instance-shaped data (the JSON document layout) and build an Instance.

    All violations are collected; the raised error's class follows the first one
    and ``error.violations`` lists every problem found.
    """
    if isinstance(raw, Instance):
        raw = raw.to_dict()
    violations: list[tuple[str, str]] = []

    values = raw.get("values")
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise violation_error([("InvalidInstance", "values must be a non-empty list")])
    try:
        vals = [float(v) for v in values]
    except (TypeError, ValueError):
        raise violation_error([("InvalidInstance", "values must be numbers")]) from None
    if not all(math.isfinite(v) for v in vals):
        violations.append(("InvalidInstance", "values must be finite"))
    if any(b <= a for a, b in zip(vals, vals[1:])):
        violations.append(("UnsortedGrid", "values must be strictly increasing"))
    k = len(vals)

    transitions: dict[str, np.ndarray] = {}
    for tid, rows in (raw.get("transitions") or {}).items():
        try:
            mat = np.array(rows, dtype=float)
        except (TypeError, ValueError):
            violations.append(("BadDistribution", f"transition {tid}: not numeric"))
            continue
        if mat.shape != (k, k):
            violations.append(("BadDistribution", f"transition {tid}: expected {k}x{k}, got {mat.shape}"))
            continue
        ok = True
        for r in range(k):
            if _check_dist(mat[r], k, f"transition {tid} row {r}", violations) is None:
                ok = False
        if ok:
            transitions[tid] = mat

    boxes_raw = raw.get("boxes") or []
    ids: list[str] = []
    for b in boxes_raw:
        bid = b.get("id")
        if not isinstance(bid, str):
            violations.append(("InvalidInstance", f"box id must be a string, got {bid!r}"))
            continue
        if bid in ids:
            violations.append(("InvalidInstance", f"duplicate box id {bid!r}"))
            continue
        ids.append(bid)
    idset = set(ids)

    edges: list[Edge] = []
    parent: dict[str, str | None] = {b: None for b in ids}
    for e in raw.get("edges") or []:
        src, dst, tid = e.get("from"), e.get("to"), e.get("transition")
        if src not in idset or dst not in idset:
            violations.append(("InvalidInstance", f"edge {src!r}->{dst!r} references an unknown box"))
            continue
        if tid not in (raw.get("transitions") or {}):
            violations.append(("InvalidInstance", f"edge {src!r}->{dst!r} references unknown transition {tid!r}"))
            continue
        if parent[dst] is not None:
            violations.append(("NotAForest", f"box {dst!r} has two parents ({parent[dst]!r}, {src!r})"))
            continue
        parent[dst] = src
        edges.append(Edge(src, dst, tid))

    # cycle detection: walk parent pointers
    for b in ids:
        seen = {b}
        p = parent[b]
        while p is not None:
            if p in seen:
                violations.append(("NotAForest", f"cycle through box {b!r}"))
                break
            seen.add(p)
            p = parent[p]

    specs: list[BoxSpec] = []
    for b in boxes_raw:
        bid = b.get("id")
        if not isinstance(bid, str):
            continue
        try:
            cost = float(b.get("cost"))
        except (TypeError, ValueError):
            violations.append(("InvalidInstance", f"box {bid!r}: cost must be a number"))
            continue
        if not math.isfinite(cost) or cost < 0:
            violations.append(("InvalidInstance", f"box {bid!r}: cost must be finite and nonnegative"))
        rd = b.get("root_dist")
        is_root = parent.get(bid) is None
        dist = None
        if is_root and rd is None:
            violations.append(("MissingRootDist", f"root box {bid!r} has no root_dist"))
        elif not is_root and rd is not None:
            violations.append(("InvalidInstance", f"box {bid!r} has a parent but also a root_dist"))
        elif rd is not None:
            dist = _check_dist(rd, k, f"box {bid!r} root_dist", violations)
        specs.append(BoxSpec(bid, cost, None if dist is None else _frozen(dist)))

    if violations:
        raise violation_error(violations)

    children: dict[str, list[str]] = {b: [] for b in ids}
    for e in edges:
        children[e.src].append(e.dst)

    order: list[str] = []
    queue = deque(b for b in ids if parent[b] is None)
    while queue:
        v = queue.popleft()
        order.append(v)
        queue.extend(children[v])

    roots_of = {}
    for v in order:
        roots_of[v] = v if parent[v] is None else roots_of[parent[v]]

    tmats = {tid: TransitionMatrix(tid, _frozen(m)) for tid, m in transitions.items()}
    forest = PrecedenceForest(
        vertices=tuple(specs),
        edges=tuple(edges),
        parent=parent,
        children={b: tuple(c) for b, c in children.items()},
        topo_order=tuple(order),
    )
    return Instance(
        grid=ValueGrid(tuple(vals)),
        forest=forest,
        transitions=tmats,
        static_transition=_is_static(edges, transitions, parent, roots_of),
        boxes={s.id: s for s in specs},
        edge_into={e.dst: e for e in edges},
    )


def propagate_marginals(instance: Instance, order: Iterable[str] | None = None) -> dict[str, np.ndarray]:
    """Unconditional reward distribution of every box.

    ``order`` may be any topological order; the default is the instance's BFS order.
    """
    order = instance.forest.topo_order if order is None else tuple(order)
    out: dict[str, np.ndarray] = {}
    for b in order:
        p = instance.parent(b)
        if p is None:
            out[b] = np.array(instance.boxes[b].root_dist)
        else:
            if p not in out:
                raise ValueError(f"order is not topological: {b!r} before its parent {p!r}")
            out[b] = out[p] @ instance.transition_into(b)
    return out


def _dirichlet_rows(rng: np.random.Generator, rows: int, k: int) -> list[list[float]]:
    return rng.dirichlet(np.ones(k), size=rows).tolist()


def generate_instance(shape: str, n: int, k: int, seed: int, static: bool = False) -> Instance:
    """Random instance; deterministic in ``(shape, n, k, seed, static)``.

    Values are increasing with one-decimal spacing, costs are drawn relative to
    the value range, transition rows are Dirichlet(1).
    """
    if n < 1 or k < 1:
        raise BadShapeParams(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if shape not in ("line", "multiline", "forest"):
        raise BadShapeParams(f"unknown shape {shape!r}")
    rng = np.random.default_rng(seed)

    start = round(float(rng.uniform(0.0, 5.0)), 1)
    steps = np.round(rng.uniform(1.0, 10.0, size=k - 1), 1)
    values = [start] + [round(start + float(s), 1) for s in np.cumsum(steps)]
    span = values[-1] if values[-1] > 0 else 1.0

    ids = [f"b{i}" for i in range(n)]
    parent: list[int | None] = [None] * n
    if shape == "line":
        for i in range(1, n):
            parent[i] = i - 1
    elif shape == "multiline":
        q = int(rng.integers(1, min(n, 3) + 1))
        cuts = sorted(rng.choice(np.arange(1, n), size=q - 1, replace=False).tolist()) if q > 1 else []
        starts = [0] + cuts
        for i in range(1, n):
            if i not in starts:
                parent[i] = i - 1
    else:
        nchild = [0] * n
        for i in range(1, n):
            if rng.random() < 0.25:
                continue
            options = [j for j in range(i) if nchild[j] < 3]
            if options:
                j = int(rng.choice(options))
                parent[i] = j
                nchild[j] += 1

    root_of = []
    for i in range(n):
        root_of.append(i if parent[i] is None else root_of[parent[i]])

    costs = [round(float(rng.uniform(0.0, 0.3 * span)), 2) for _ in range(n)]
    transitions: dict[str, list] = {}
    edges = []
    for i in range(n):
        if parent[i] is None:
            continue
        tid = f"P{root_of[i]}" if static else f"P{i}"
        if tid not in transitions:
            transitions[tid] = _dirichlet_rows(rng, k, k)
        edges.append({"from": ids[parent[i]], "to": ids[i], "transition": tid})
    boxes = []
    for i in range(n):
        rd = rng.dirichlet(np.ones(k)).tolist() if parent[i] is None else None
        boxes.append({"id": ids[i], "cost": costs[i], "root_dist": rd})
    return validate_instance(
        {"values": values, "boxes": boxes, "edges": edges, "transitions": transitions}
    )
