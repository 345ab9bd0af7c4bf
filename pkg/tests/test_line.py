import itertools

import numpy as np
import pytest

from cases import TOL, chain_instance, line_cases, realizations, single_box, table_violations
from pandora.boxes import NO_OPEN, RandomCostBox, reservation_value
from pandora.line import Hyperbox, compute_phi_table, expected_payoff_line, run_line_policy
from pandora.multiline import contract_line
from pandora.oracle import brute_force_optimal


def _line(inst):
    return Hyperbox.from_instance(inst, inst.forest.components()[0])


def _table(inst):
    return compute_phi_table(_line(inst))


UNIFORM = [[0.5, 0.5], [0.5, 0.5]]


def test_one_box_base_case():
    t = _table(single_box(values=(0.0, 10.0, 20.0), probs=(0.5, 0.0, 0.5), cost=2.0))
    assert t.value(10.0, None, 0) == pytest.approx(13.0)
    assert t.is_open(10.0, None, 0)
    # off-grid points go through the piecewise-linear continuation
    off = _table(single_box(values=(0.0, 20.0), cost=2.0))
    assert off.local_linear(10.0, None, 0)[0] == pytest.approx(13.0)


def test_top_of_grid_absorbs():
    t = _table(single_box(values=(0.0, 20.0), cost=0.5))
    assert t.value(20.0, None, 0) == 20.0
    assert not t.is_open(20.0, None, 0)


def test_two_box_chain_matches_oracle():
    inst = chain_instance((0.0, 10.0), (0.5, 0.5), [UNIFORM], (1.0, 1.0))
    assert expected_payoff_line(_table(inst)) == pytest.approx(brute_force_optimal(inst), abs=TOL)


def test_weitzman_reservation_value():
    assert _table(single_box()).grv(0, None) == pytest.approx(6.0)
    assert reservation_value({10.0: 0.5, 0.0: 0.5}, 2.0) == pytest.approx(6.0)


def test_free_point_mass_reservation():
    assert reservation_value({7.0: 1.0}, 0.0) == 7.0
    t = _table(single_box(values=(0.0, 7.0), probs=(0.0, 1.0), cost=0.0))
    assert t.grv(0, None) == pytest.approx(7.0)


def test_expected_payoff_examples():
    assert expected_payoff_line(_table(single_box())) == pytest.approx(3.0)
    assert expected_payoff_line(_table(single_box(cost=11.0))) == 0.0


def test_policy_single_box():
    inst = single_box()
    t, h = _table(inst), _line(inst)
    out = run_line_policy(t, h, {"a": 1})
    assert out.opened == ("a",) and out.payoff == 8.0
    never = single_box(cost=12.0)
    assert run_line_policy(_table(never), _line(never), {"a": 1}).opened == ()


def test_policy_stops_at_top_value():
    inst = chain_instance((0.0, 10.0), (0.5, 0.5), [UNIFORM], (1.0, 1.0))
    t, h = _table(inst), _line(inst)
    assert run_line_policy(t, h, {"b0": 1, "b1": 0}).opened == ("b0",)


@pytest.mark.parametrize("inst", list(line_cases(25)), ids=lambda i: f"n{i.n}k{i.k}")
def test_policy_mean_equals_table_value(inst):
    t, h = _table(inst), _line(inst)
    mean = sum(p * run_line_policy(t, h, r).payoff for r, p in realizations(inst))
    assert mean == pytest.approx(expected_payoff_line(t), abs=TOL)


@pytest.mark.parametrize("inst", list(line_cases(25)), ids=lambda i: f"n{i.n}k{i.k}")
def test_atoms_match_policy_payoffs(inst):
    t, h = _table(inst), _line(inst)
    law: dict = {}
    for r, p in realizations(inst):
        out = run_line_policy(t, h, r)
        key = (round(out.max_reward if out.opened else NO_OPEN, 9), round(out.total_cost, 9))
        law[key] = law.get(key, 0.0) + p
    box = contract_line(h, table=t)
    got: dict = {}
    for r, c, p in box.atoms:
        key = (round(r, 9) if r != NO_OPEN else NO_OPEN, round(c, 9))
        got[key] = got.get(key, 0.0) + p
    assert set(got) == set(law)
    for k in law:
        assert got[k] == pytest.approx(law[k], abs=1e-12)


def test_contract_line_examples():
    box = contract_line(_line(single_box()))
    assert sorted(box.atoms) == [(0.0, 2.0, 0.5), (10.0, 2.0, 0.5)]
    never = contract_line(_line(single_box(cost=11.0)))
    assert never.atoms == ((NO_OPEN, 0.0, 1.0),)


def test_random_tables_have_table_properties():
    for inst in line_cases(40):
        assert table_violations(_table(inst)) == []


def test_negative_values_supported():
    inst = chain_instance((-5.0, 2.0, 9.0), (0.3, 0.4, 0.3), [np.full((3, 3), 1 / 3)], (0.5, 0.5))
    assert expected_payoff_line(_table(inst)) == pytest.approx(brute_force_optimal(inst), abs=TOL)


def test_table_json_is_serializable():
    import json

    doc = json.loads(_table(single_box()).dumps())
    assert doc


def test_random_cost_box_helpers():
    box = RandomCostBox.from_atoms([(10.0, 2.0, 0.5), (0.0, 2.0, 0.5)])
    assert box.expected_utility(0.0) == pytest.approx(3.0)
    assert box.reservation_value() == pytest.approx(6.0)
    assert RandomCostBox.point(4.0).reservation_value() == 4.0
    assert all(c == 0.0 for _, c, _ in box.amortized().atoms)
    for x in (0.0, 3.0, 7.0):
        assert box.amortized().expected_utility(x) <= box.expected_utility(x) + TOL or x >= 6.0
