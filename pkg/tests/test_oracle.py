import random

import numpy as np
import pytest

from cases import TOL, forest_cases, line_cases, single_box, validate_instance
from pandora.errors import TooLarge
from pandora.model import generate_instance
from pandora.oracle import (
    abc_instance,
    best_na_value,
    best_pa_value,
    brute_force_optimal,
    downward_closed_sets,
    linear_extensions,
    order_value,
)


def independent_boxes(seed, n=4, k=3):
    r = random.Random(seed)
    vals = sorted(round(r.uniform(0, 20), 1) for _ in range(k))
    boxes = []
    for i in range(n):
        w = [r.random() for _ in range(k)]
        boxes.append({"id": f"x{i}", "cost": round(r.uniform(0, 4), 1), "root_dist": [v / sum(w) for v in w]})
    return validate_instance({"values": vals, "boxes": boxes, "edges": [], "transitions": {}})


def test_single_box_value():
    assert brute_force_optimal(single_box()) == pytest.approx(3.0)


def test_memo_does_not_change_value():
    for inst in [f for f in forest_cases(30) if f.n <= 5][:8]:
        assert brute_force_optimal(inst, memo=True) == brute_force_optimal(inst, memo=False)


def test_class_nesting_and_single_line():
    for inst in list(line_cases(15)):
        fa = brute_force_optimal(inst)
        pa, order = best_pa_value(inst)
        na, _ = best_na_value(inst)
        assert pa == pytest.approx(fa, abs=TOL)
        assert na <= pa + TOL
        assert order == inst.forest.components()[0]


@pytest.mark.parametrize("seed", range(6))
def test_independent_boxes_pa_equals_fa(seed):
    inst = independent_boxes(seed)
    assert best_pa_value(inst)[0] == pytest.approx(brute_force_optimal(inst), abs=TOL)


def test_abc_orders():
    inst = abc_instance()
    assert brute_force_optimal(inst) > best_pa_value(inst)[0]
    assert order_value(inst, ("A", "C", "B")) >= order_value(inst, ("A", "B", "C"))


def test_linear_extensions_respect_precedence():
    inst = generate_instance("forest", 5, 2, 8)
    orders = list(linear_extensions(inst))
    assert len(set(orders)) == len(orders)
    for o in orders:
        pos = {b: i for i, b in enumerate(o)}
        assert all(pos[inst.parent(b)] < pos[b] for b in inst.ids if inst.parent(b))


def test_downward_closed_sets():
    inst = generate_instance("line", 3, 2, 0)
    assert sorted(map(len, downward_closed_sets(inst))) == [0, 1, 2, 3]


def test_na_extremes():
    free = independent_boxes(1)
    raw = free.to_dict()
    for b in raw["boxes"]:
        b["cost"] = 0.0
    value, chosen = best_na_value(validate_instance(raw))
    assert set(chosen) == set(free.ids)
    for b in raw["boxes"]:
        b["cost"] = 1e6
    assert best_na_value(validate_instance(raw)) == (0.0, ())


def test_caps():
    with pytest.raises(TooLarge):
        brute_force_optimal(generate_instance("line", 13, 2, 0))
    with pytest.raises(TooLarge):
        best_pa_value(generate_instance("multiline", 11, 2, 0))
