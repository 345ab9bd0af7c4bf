"""Brute-force ground truth: fully adaptive, partially adaptive and non-adaptive optima.

Nothing clever happens here on purpose. Every value is a plain backward
induction or an exhaustive enumeration so the solvers have something obviously
correct to be compared against.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import TooLarge
from .model import Instance, validate_instance

MAX_FA_BOXES = 12
MAX_FA_STATES = 6**12
MAX_PA_BOXES = 10
MAX_NA_BOXES = 16


def _index(instance: Instance):
    ids = instance.ids
    pos = {b: j for j, b in enumerate(ids)}
    parent = [None if instance.parent(b) is None else pos[instance.parent(b)] for b in ids]
    dists = []
    for j, b in enumerate(ids):
        if parent[j] is None:
            dists.append(np.asarray(instance.boxes[b].root_dist, dtype=float))
        else:
            dists.append(np.asarray(instance.transition_into(b), dtype=float))
    costs = [instance.cost(b) for b in ids]
    return ids, parent, dists, costs


def _law(dists, parent, state, j):
    d = dists[j] if parent[j] is None else dists[j][state[parent[j]]]
    return [(y, float(p)) for y, p in enumerate(d) if p > 0.0]


def brute_force_optimal(instance: Instance, outside: float = 0.0, memo: bool = True) -> float:
    """Fully adaptive optimum by backward induction over complete information sets."""
    n, k = instance.n, instance.k
    if n > MAX_FA_BOXES or (k + 1) ** n > MAX_FA_STATES:
        raise TooLarge(f"n={n}, k={k} exceeds the oracle's caps")
    ids, parent, dists, costs = _index(instance)
    vals = instance.grid.values

    def V(state: tuple) -> float:
        x = outside
        for s in state:
            if s >= 0 and vals[s] > x:
                x = vals[s]
        best = x
        for j in range(n):
            if state[j] >= 0 or (parent[j] is not None and state[parent[j]] < 0):
                continue
            tot = -costs[j]
            for y, p in _law(dists, parent, state, j):
                nxt = state[:j] + (y,) + state[j + 1:]
                tot += p * V(nxt)
            if tot > best:
                best = tot
        return best

    if memo:
        V = lru_cache(maxsize=None)(V)
    return V((-1,) * n)


def linear_extensions(instance: Instance):
    """All precedence-feasible orders of every box, in lexicographic order of ids."""
    ids = sorted(instance.ids)
    order: list[str] = []
    done: set[str] = set()

    def rec():
        if len(order) == len(ids):
            yield tuple(order)
            return
        for b in ids:
            if b in done:
                continue
            p = instance.parent(b)
            if p is not None and p not in done:
                continue
            done.add(b)
            order.append(b)
            yield from rec()
            order.pop()
            done.discard(b)

    yield from rec()


def order_value(instance: Instance, order, outside: float = 0.0) -> float:
    """Best adaptive stopping value when boxes must be opened in the fixed ``order``.

    Memoized on (position, current max, states of opened boxes that still have
    an unopened child); the rest of the prefix cannot affect the future.
    """
    vals = instance.grid.values
    order = tuple(order)
    n = len(order)
    pos = {b: t for t, b in enumerate(order)}
    # for each position t, the opened boxes whose state still matters afterwards
    live = []
    for t in range(n + 1):
        live.append(tuple(
            b for b in order[:t]
            if any(pos[c] >= t for c in instance.children(b))
        ))
    memo: dict = {}

    def V(t: int, x: float, states: dict) -> float:
        if t == n:
            return x
        key = (t, x, tuple(states[b] for b in live[t]))
        if key in memo:
            return memo[key]
        b = order[t]
        p = instance.parent(b)
        dist = instance.dist(b, None if p is None else states[p])
        tot = -instance.cost(b)
        for y, q in enumerate(dist):
            if q == 0.0:
                continue
            states[b] = y
            tot += q * V(t + 1, max(x, vals[y]), states)
            del states[b]
        out = max(x, tot)
        memo[key] = out
        return out

    return V(0, outside, {})


def best_pa_value(instance: Instance, outside: float = 0.0) -> tuple[float, tuple[str, ...]]:
    """Best partially adaptive value: fixed probing order, adaptive stopping."""
    if instance.n > MAX_PA_BOXES:
        raise TooLarge(f"n={instance.n} exceeds {MAX_PA_BOXES} boxes")
    if instance.n == 0:
        return outside, ()
    best, arg = -math.inf, ()
    for order in linear_extensions(instance):
        v = order_value(instance, order, outside)
        if v > best + 1e-12:
            best, arg = v, order
    return best, arg


def downward_closed_sets(instance: Instance):
    order = instance.forest.topo_order
    chosen: list[str] = []
    inside: set[str] = set()

    def rec(t: int):
        if t == len(order):
            yield tuple(chosen)
            return
        b = order[t]
        yield from rec(t + 1)
        p = instance.parent(b)
        if p is None or p in inside:
            inside.add(b)
            chosen.append(b)
            yield from rec(t + 1)
            chosen.pop()
            inside.discard(b)

    yield from rec(0)


def expected_max_of_set(instance: Instance, subset, outside: float = 0.0) -> float:
    """E[max(outside, max over subset of R_b)] from the exact joint law along each tree."""
    vals = np.array(instance.grid.values)
    sset = set(subset)
    if not sset:
        return outside
    roots = [b for b in sset if instance.parent(b) is None]
    levels = sorted({float(v) for v in vals if v > outside})

    def below(b: str, v: float) -> np.ndarray:
        # g[s] = Pr(b and its chosen descendants all <= v | b in state s)
        g = (vals <= v).astype(float)
        for c in instance.children(b):
            if c in sset:
                g = g * (instance.transition_into(c) @ below(c, v))
        return g

    def cdf(v: float) -> float:
        out = 1.0
        for r in roots:
            out *= float(instance.boxes[r].root_dist @ below(r, v))
        return out

    total = outside
    prev = cdf(outside)
    for v in levels:
        cur = cdf(v)
        total += (cur - prev) * (v - outside)
        prev = cur
    return total


def best_na_value(instance: Instance, outside: float = 0.0) -> tuple[float, tuple[str, ...]]:
    """Best non-adaptive value over all downward-closed sets (open the whole set)."""
    if instance.n > MAX_NA_BOXES:
        raise TooLarge(f"n={instance.n} exceeds {MAX_NA_BOXES} boxes")
    best, arg = -math.inf, ()
    for s in downward_closed_sets(instance):
        v = expected_max_of_set(instance, s, outside) - math.fsum(instance.cost(b) for b in s)
        if v > best + 1e-12:
            best, arg = v, s
    return best, tuple(sorted(arg))


def abc_instance() -> Instance:
    """Two trees: A -> B and a lone C; the classic fixed-order counterexample."""
    values = [-9.0, 1.0, 10.0, 21.0, 50.0, 890.0, 900.0, 920.0]
    k = len(values)
    idx = {v: j for j, v in enumerate(values)}

    def point(pairs):
        row = [0.0] * k
        for v, p in pairs:
            row[idx[v]] += p
        return row

    rows = [point([(v, 1.0)]) for v in values]
    rows[idx[1.0]] = point([(21.0, 0.5), (-9.0, 0.5)])
    rows[idx[900.0]] = point([(920.0, 0.5), (890.0, 0.5)])
    return validate_instance({
        "values": values,
        "boxes": [
            {"id": "A", "cost": 20.0, "root_dist": point([(900.0, 0.1), (1.0, 0.9)])},
            {"id": "B", "cost": 3.0, "root_dist": None},
            {"id": "C", "cost": 5.0, "root_dist": point([(50.0, 0.5), (10.0, 0.5)])},
        ],
        "edges": [{"from": "A", "to": "B", "transition": "PAB"}],
        "transitions": {"PAB": rows},
    })
