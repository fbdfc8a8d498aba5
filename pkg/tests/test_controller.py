
import pytest
from hypothesis import given, strategies as st

from adaclust.controller import ClusterBudget, ControllerConfig, budget_trace, update_budgets
from adaclust.errors import DimensionError

CFG = ControllerConfig(confusion_threshold=0.3, max_clusters=5)


def step(num, flag, fn, cfg=CFG):
    out = update_budgets(ClusterBudget((num,), (flag,)), [fn], cfg)
    return out.num_allowed[0], out.flag[0]


def test_increase_below_cap():
    assert step(1, 0, 0.5) == (2, 0)


def test_flag_set_when_cap_reached():
    assert step(4, 0, 0.5) == (5, 1)


def test_flag_cleared_when_back_to_one():
    assert step(2, 1, 0.5) == (1, 0)


@pytest.mark.parametrize("num, flag", [(1, 0), (3, 0), (5, 1), (2, 1)])
def test_below_threshold_is_fixpoint(num, flag):
    assert step(num, flag, 0.1) == (num, flag)


def test_threshold_equality_does_not_trigger():
    assert step(2, 0, 0.3) == (2, 0)


def test_initial_state():
    b = ClusterBudget.initial(3)
    assert b.num_allowed == (1, 1, 1) and b.flag == (0, 0, 0)


def test_length_mismatch():
    with pytest.raises(DimensionError):
        update_budgets(ClusterBudget.initial(2), [0.5], CFG)


def test_oscillation_trajectory_max5():
    b = ClusterBudget.initial(1)
    seq = [b.num_allowed[0]]
    for _ in range(16):
        b = update_budgets(b, [0.9], CFG)
        seq.append(b.num_allowed[0])
    assert seq == [1, 2, 3, 4, 5, 4, 3, 2, 1, 2, 3, 4, 5, 4, 3, 2, 1]
    # period 2 * (max - 1)
    assert seq[:9] == seq[8:]


states = st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.sampled_from([0, 1])))


@given(st.lists(st.tuples(states, st.floats(0, 1)), min_size=1, max_size=8))
def test_budget_stays_in_range(entries):
    b = ClusterBudget(tuple(e[0][0] for e in entries), tuple(e[0][1] for e in entries))
    out = update_budgets(b, [e[1] for e in entries], CFG)
    assert all(1 <= n <= 5 for n in out.num_allowed)
    assert all(f in (0, 1) for f in out.flag)


@given(st.lists(st.tuples(states, st.floats(0, 1)), min_size=2, max_size=8), st.randoms())
def test_classes_update_independently(entries, rnd):
    perm = list(range(len(entries)))
    rnd.shuffle(perm)
    b = ClusterBudget(tuple(e[0][0] for e in entries), tuple(e[0][1] for e in entries))
    fn = [e[1] for e in entries]
    out = update_budgets(b, fn, CFG)
    pb = ClusterBudget(tuple(b.num_allowed[i] for i in perm), tuple(b.flag[i] for i in perm))
    pout = update_budgets(pb, [fn[i] for i in perm], CFG)
    assert pout.num_allowed == tuple(out.num_allowed[i] for i in perm)
    assert pout.flag == tuple(out.flag[i] for i in perm)


def test_max_clusters_one_never_leaves_one():
    cfg = ControllerConfig(0.3, 1)
    num, flag = 1, 0
    for _ in range(4):
        num, flag = step(num, flag, 0.9, cfg)
        assert num == 1


def test_trace_constant():
    h = [ClusterBudget((2,), (0,))] * 4
    t = budget_trace(h)[0]
    assert t.reversals == 0 and t.final == 2


def test_trace_one_reversal():
    h = [ClusterBudget((n,), (0,)) for n in (1, 2, 3, 2)]
    t = budget_trace(h)[0]
    assert t.sequence == [1, 2, 3, 2] and t.reversals == 1 and t.final == 2


def test_trace_single_entry():
    t = budget_trace([ClusterBudget((3,), (1,))])[0]
    assert t.final == 3 and t.reversals == 0
