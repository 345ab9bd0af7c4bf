"""Seeded instance families shared by the unit and acceptance suites."""

from __future__ import annotations

import random

import numpy as np

from pandora.boxes import RandomCostBox
from pandora.model import generate_instance, validate_instance
from pandora.static import check_irreducible_aperiodic, pooled_horizon

TOL = 1e-9


def line_cases(count=200):
    for s in range(count):
        r = random.Random(1000 + s)
        yield generate_instance("line", r.randint(1, 6), r.randint(1, 4), 1000 + s)


def multiline_cases(count=200):
    for s in range(count):
        r = random.Random(2000 + s)
        yield generate_instance("multiline", r.randint(1, 8), r.randint(1, 4), 2000 + s)


def forest_cases(count=200):
    for s in range(count):
        r = random.Random(3000 + s)
        yield generate_instance("forest", r.randint(1, 8), r.randint(1, 3), 3000 + s)


def single_box(values=(0.0, 10.0), probs=(0.5, 0.5), cost=2.0):
    return validate_instance({
        "values": list(values),
        "boxes": [{"id": "a", "cost": cost, "root_dist": list(probs)}],
        "edges": [],
        "transitions": {},
    })


def chain_instance(values, root, matrices, costs, ids=None):
    """A single line b0 -> b1 -> ... with one matrix per edge."""
    n = len(costs)
    ids = ids or [f"b{i}" for i in range(n)]
    return validate_instance({
        "values": list(values),
        "boxes": [{"id": ids[i], "cost": costs[i], "root_dist": list(root) if i == 0 else None}
                  for i in range(n)],
        "edges": [{"from": ids[i - 1], "to": ids[i], "transition": f"P{i}"} for i in range(1, n)],
        "transitions": {f"P{i}": np.asarray(matrices[i - 1]).tolist() for i in range(1, n)},
    })


def random_chain(rng: np.random.Generator, k: int) -> np.ndarray:
    while True:
        P = rng.dirichlet(np.ones(k), size=k)
        if all(check_irreducible_aperiodic(P)):
            return P


def static_line_union(seed: int, delta: float, max_len: int = 60):
    """Static union of one or two lines, each line running past the truncation horizon.

    Draws are repeated until the pooled horizon fits ``max_len`` so exact
    evaluation of the full instance stays cheap.
    """
    rng = np.random.default_rng(seed)
    while True:
        k = int(rng.integers(2, 4))
        q = int(rng.integers(1, 3))
        values = np.round(np.cumsum(rng.uniform(1.0, 10.0, size=k)), 1).tolist()
        mats = [random_chain(rng, k) for _ in range(q)]
        boxes, edges, trans = [], [], {}
        for j, P in enumerate(mats):
            trans[f"P{j}"] = P.tolist()
        raw = {"values": values, "boxes": boxes, "edges": edges, "transitions": trans}
        # horizon first (with one box per line), then the real lengths
        for j in range(q):
            boxes.append({"id": f"l{j}_0", "cost": 0.0, "root_dist": rng.dirichlet(np.ones(k)).tolist()})
            boxes.append({"id": f"l{j}_1", "cost": 0.0, "root_dist": None})
            edges.append({"from": f"l{j}_0", "to": f"l{j}_1", "transition": f"P{j}"})
        t, _ = pooled_horizon(validate_instance(raw), delta)
        if t + 5 > max_len:
            continue
        boxes.clear()
        edges.clear()
        for j in range(q):
            length = t + int(rng.integers(1, 6))
            root = rng.dirichlet(np.ones(k)).tolist()
            for i in range(length):
                boxes.append({
                    "id": f"l{j}_{i}",
                    "cost": round(float(rng.uniform(0.0, 0.3 * values[-1] / 4)), 2),
                    "root_dist": root if i == 0 else None,
                })
                if i:
                    edges.append({"from": f"l{j}_{i - 1}", "to": f"l{j}_{i}", "transition": f"P{j}"})
        return validate_instance(raw), t


def static_forest_cases(count=100):
    for s in range(count):
        r = random.Random(4000 + s)
        yield generate_instance("forest", r.randint(1, 8), r.randint(2, 3), 4000 + s, static=True)


def random_cost_box(r: random.Random, lo: float, hi: float, m: int) -> RandomCostBox:
    w = [r.random() for _ in range(m)]
    s = sum(w)
    return RandomCostBox.from_atoms(
        (round(r.uniform(lo, hi), 1), round(r.uniform(0.0, 4.0), 1), x / s) for x in w
    )


def exchange_config(seed: int):
    """A, B independent; C depends on both and never out-indexes B."""
    r = random.Random(5000 + seed)
    A = random_cost_box(r, 0.0, 30.0, r.randint(1, 3))
    B = random_cost_box(r, 0.0, 30.0, r.randint(1, 3))
    if A.reservation_value() < B.reservation_value():
        A, B = B, A
    sb = B.reservation_value()
    lo, hi = min(0.0, sb), sb
    table = {
        (a, b): random_cost_box(r, lo, hi, r.randint(1, 3))
        for a in range(len(A.atoms)) for b in range(len(B.atoms))
    }
    x = r.uniform(-5.0, 25.0)
    return A, B, (lambda a, b: table[(a, b)]), x


def table_violations(table, tol=TOL):
    """Lipschitz / monotone / absorption / atom-consistency problems of one table."""
    out = []
    X = table.xgrid
    line = table.line
    for i in range(line.n):
        for slot in range(line.k + 1):
            if line.dist(i, slot) is None:
                continue
            phi = table.phi[i, slot]
            H = phi - X
            dphi = np.diff(phi)
            if np.any(dphi < -tol) or np.any(dphi > np.diff(X) + tol):
                out.append(("lipschitz", i, slot))
            if np.any(H < -tol) or np.any(np.diff(H) > tol):
                out.append(("H", i, slot))
            sigma = table.grv(i, None if slot == 0 else slot - 1)
            for xj, x in enumerate(X):
                if x >= sigma and abs(phi[xj] - x) > tol:
                    out.append(("absorb", i, slot, float(x)))
                if table.open[i, slot, xj]:
                    atoms = table.atoms[i][slot][xj]
                    val = sum(p * (max(x, r) - c) for r, c, p in atoms)
                    if abs(val - phi[xj]) > tol or abs(sum(p for _, _, p in atoms) - 1.0) > 1e-10:
                        out.append(("atoms", i, slot, float(x)))
    return out


def realizations(instance):
    """Every joint assignment with its probability (zero-probability ones skipped)."""
    order = instance.forest.topo_order
    out = [({}, 1.0)]
    for b in order:
        nxt = []
        for assign, pr in out:
            p = instance.parent(b)
            row = instance.dist(b, None if p is None else assign[p])
            for y, q in enumerate(row):
                if q > 0.0:
                    nxt.append(({**assign, b: y}, pr * float(q)))
        out = nxt
    return out


def tree_instance(values, parents, costs, root_dists, matrices):
    """Forest from a parent map; ``matrices[b]`` is the matrix on the edge into b."""
    ids = list(parents)
    return validate_instance({
        "values": list(values),
        "boxes": [{"id": b, "cost": costs[b], "root_dist": root_dists.get(b)} for b in ids],
        "edges": [{"from": parents[b], "to": b, "transition": f"T_{b}"} for b in ids if parents[b]],
        "transitions": {f"T_{b}": np.asarray(matrices[b]).tolist() for b in ids if parents[b]},
    })
