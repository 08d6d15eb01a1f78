import numpy as np
import pytest

import oracle
import pinned
from cassure import BuildError, bind_constants, build_dtmc, parse_model
from cassure.statespace import (
    build_state_space, export_states, export_transitions, fix_deadlocks,
    label_states,
)
from cassure.model import Binary, Lit, Name


def test_reachable_state_count(space):
    assert space.n_states == pinned.STATE_COUNT


def test_initial_state(space):
    assert space.valuation(space.initial) == {
        "loc": 0, "batt": 100, "rad": 0, "sw": 0, "vel": 2, "op_used": False}


def test_rows_are_stochastic(space):
    for s in range(space.n_states):
        lo, hi = space.indptr[s], space.indptr[s + 1]
        assert hi > lo
        assert space.data[lo:hi].sum() == pytest.approx(1.0, abs=1e-12)
        assert (space.data[lo:hi] > 0).all()


def test_matrix_matches_oracle_exactly(space):
    """Every engine transition equals the oracle's exact fraction."""
    states, index, rows = oracle.build_chain(dict(oracle.DEFAULTS))
    assert len(states) == space.n_states
    names = space.var_names
    for s in range(space.n_states):
        val = space.valuation(s)
        key = tuple(val[n] for n in ("loc", "batt", "rad", "sw", "vel", "op_used"))
        o = index[key]
        expected = {states[t]: p for t, p in rows[o].items()}
        got = {}
        cols, probs = space.row(s)
        for dst, p in zip(cols, probs):
            dv = space.valuation(dst)
            dk = tuple(dv[n] for n in ("loc", "batt", "rad", "sw", "vel",
                                       "op_used"))
            got[dk] = got.get(dk, 0.0) + p
        assert set(got) == set(expected)
        for k in got:
            assert got[k] == pytest.approx(float(expected[k]), abs=1e-14)


def test_mode_velocity_invariant(space):
    """sw=0 -> vel=2, sw=1 -> vel=1, sw=2 -> vel=0 in every reachable state."""
    expected_vel = {0: 2, 1: 1, 2: 0}
    for s in range(space.n_states):
        v = space.valuation(s)
        assert v["vel"] == expected_vel[v["sw"]]


def test_build_is_deterministic(bound):
    a = build_dtmc(bound)
    b = build_dtmc(bound)
    assert a.states == b.states
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)
    assert export_transitions(a) == export_transitions(b)
    assert export_states(a) == export_states(b)


def test_deadlock_fixing_reports_and_self_loops():
    text = """\
dtmc
module m
  x : [0..2] init 0;
  [] x = 0 -> 0.5 : (x'=1) + 0.5 : (x'=2);
  [] x = 1 -> (x'=1);
endmodule
"""
    bound = bind_constants(parse_model(text))
    raw = build_state_space(bound)
    fixed = fix_deadlocks(raw)
    assert fixed.diagnostics.deadlock_states_fixed == 1
    two = next(s for s in range(fixed.n_states)
               if fixed.valuation(s)["x"] == 2)
    cols, probs = fixed.row(two)
    assert cols.tolist() == [two] and probs.tolist() == [1.0]
    # idempotent
    again = fix_deadlocks(fixed)
    assert again.diagnostics.deadlock_states_fixed == 1
    assert np.array_equal(again.data, fixed.data)


def test_out_of_range_assignment_is_an_error():
    text = """\
dtmc
module m
  x : [0..2] init 0;
  [] x < 3 -> (x'=x+1);
endmodule
"""
    bound = bind_constants(parse_model(text))
    with pytest.raises(BuildError, match="outside"):
        build_state_space(bound)


def test_rewards_vectors(space):
    moves = space.rewards["moves"]
    for s in range(space.n_states):
        v = space.valuation(s)
        assert moves[s] == (1.0 if v["loc"] < 4 else 0.0)
    assert set(space.rewards) == {"moves", "dose", "time_in_cm", "time_stopped"}


def test_label_states_uses_formulas_and_constants(space):
    mask = label_states(space, Name("is_critical"))
    for s in range(space.n_states):
        assert mask[s] == (space.valuation(s)["rad"] == 2)
    thr = label_states(space, Binary("<", Name("batt"), Name("batt_threshold")))
    for s in range(space.n_states):
        assert thr[s] == (space.valuation(s)["batt"] < 30)


def test_synchronized_commands_set_op_used(space):
    """Operator commands only fire in patrol mode and mark op_used."""
    saw_op = False
    for s in range(space.n_states):
        v = space.valuation(s)
        if v["op_used"]:
            saw_op = True
        if v["sw"] != 0:
            # op_used can persist after leaving patrol, but never first
            # becomes true there: check via predecessors is implicit in the
            # oracle equivalence test; here just ensure such states exist.
            pass
    assert saw_op
