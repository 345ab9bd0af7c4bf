import numpy as np
import pytest

from cases import chain_instance, single_box
from pandora.errors import BadDistribution, BadShapeParams, MissingRootDist, NotAForest, UnsortedGrid
from pandora.model import generate_instance, propagate_marginals, validate_instance


def _two_box(matrix, root=(0.5, 0.5)):
    return chain_instance((0.0, 10.0), root, [matrix], (1.0, 1.0))


def test_single_box_is_valid():
    inst = single_box()
    assert inst.n == 1 and inst.k == 2
    assert inst.forest.roots == ("a",)


def test_two_parents_rejected():
    raw = {
        "values": [0, 10],
        "boxes": [
            {"id": "a", "cost": 1, "root_dist": [0.5, 0.5]},
            {"id": "b", "cost": 1, "root_dist": [0.5, 0.5]},
            {"id": "c", "cost": 1, "root_dist": None},
        ],
        "edges": [
            {"from": "a", "to": "c", "transition": "P"},
            {"from": "b", "to": "c", "transition": "P"},
        ],
        "transitions": {"P": [[0.5, 0.5], [0.5, 0.5]]},
    }
    with pytest.raises(NotAForest):
        validate_instance(raw)


def test_bad_row_sum_rejected():
    with pytest.raises(BadDistribution) as e:
        _two_box([[0.5, 0.6], [0.5, 0.5]])
    assert "1.1" in e.value.detail


def test_missing_root_dist_and_unsorted_grid():
    raw = single_box().to_dict()
    raw["boxes"][0]["root_dist"] = None
    with pytest.raises(MissingRootDist):
        validate_instance(raw)
    raw = single_box().to_dict()
    raw["values"] = [10.0, 0.0]
    with pytest.raises(UnsortedGrid):
        validate_instance(raw)


def test_cycle_rejected():
    raw = {
        "values": [0, 1],
        "boxes": [{"id": "a", "cost": 0, "root_dist": None}, {"id": "b", "cost": 0, "root_dist": None}],
        "edges": [{"from": "a", "to": "b", "transition": "P"}, {"from": "b", "to": "a", "transition": "P"}],
        "transitions": {"P": [[1, 0], [0, 1]]},
    }
    with pytest.raises(NotAForest):
        validate_instance(raw)


def test_round_trip():
    inst = generate_instance("forest", 6, 3, 11)
    assert validate_instance(inst.to_dict()).to_dict() == inst.to_dict()


@pytest.mark.parametrize("root,P,want", [
    ((1.0, 0.0), [[0, 1], [1, 0]], (0.0, 1.0)),
    ((0.5, 0.5), [[0.5, 0.5], [0.5, 0.5]], (0.5, 0.5)),
])
def test_propagate_one_step(root, P, want):
    m = propagate_marginals(_two_box(P, root))
    assert np.allclose(m["b1"], want)


def test_propagate_two_steps():
    P = [[0.9, 0.1], [0.2, 0.8]]
    inst = chain_instance((0.0, 10.0), (1.0, 0.0), [P, P], (1.0, 1.0, 1.0))
    assert np.allclose(propagate_marginals(inst)["b2"], (0.83, 0.17))


def test_propagate_any_topological_order():
    inst = generate_instance("forest", 8, 3, 5)
    a = propagate_marginals(inst)
    order = []
    for comp in reversed(inst.forest.components()):
        order.extend(comp)
    b = propagate_marginals(inst, order)
    for k in a:
        assert np.allclose(a[k], b[k], atol=1e-12)


def test_generator_contracts():
    one = generate_instance("line", 1, 2, 7, static=True)
    assert one.n == 1
    assert generate_instance("multiline", 7, 3, 3).to_dict() == generate_instance("multiline", 7, 3, 3).to_dict()
    f = generate_instance("forest", 8, 3, 1)
    assert f.n == 8
    assert all(sum(1 for e in f.forest.edges if e.dst == b) <= 1 for b in f.ids)
    with pytest.raises(BadShapeParams):
        generate_instance("forest", 0, 3, 1)
    with pytest.raises(BadShapeParams):
        generate_instance("star", 3, 3, 1)


def test_static_generator_shares_matrix_per_tree():
    inst = generate_instance("forest", 8, 3, 4, static=True)
    assert inst.static_transition
    root_of = {b: comp[0] for comp in inst.forest.components() for b in comp}
    for e in inst.forest.edges:
        assert e.transition == f"P{root_of[e.dst][1:]}"
