import itertools
import math

import pytest

from app import seeding
from app.actionset import ActionSet
from app.distmodel import CardinalityLaw, cardinality_law
from app.estimators import estimate_strategy_success
from app.exceptions import ConfigError, EnumerationBudgetError, IllegalActionError, StrategyError
from app.families import example45
from app.goals import always_nonzero, eventually_nonzero
from app.mdpcore import (
    WindowValueSolver,
    check_size_matches_actions,
    check_step1,
    check_step4,
    check_step5_bound,
    check_step6_dominance,
    check_value_supermartingale,
    enumerate_states,
    enumerate_transitions,
    finite_horizon_value,
    size,
    state_distribution_phi,
    state_predicate_from_config,
    transition_prob,
    transition_sample,
)
from app.models.state import MdpState
from app.strategies import one_step_maximizing_strategy, smallest_action_strategy

ONE_TWO = ActionSet.of([1, 2])
ZERO = ActionSet.singleton(0)


def test_enumerated_states_form_a_law(tiny):
    states = enumerate_states(tiny, 0, 1)
    assert len(states) == 6
    assert math.fsum(p for _, p in states) == pytest.approx(1.0)
    assert len({s.digest for s, _ in states}) == 6


def test_state_size_is_largest_continuation_count():
    state = MdpState(1, {(): ONE_TWO, (1,): ONE_TWO, (2,): ZERO})
    assert size(state) == 2
    assert size(MdpState(0, {(): ONE_TWO})) == 1


def test_transitions_sum_to_one_and_match_probabilities(tiny):
    state = MdpState(1, {(): ONE_TWO, (1,): ONE_TWO, (2,): ZERO})
    successors = list(enumerate_transitions(state, 1, 0, tiny))
    assert len(successors) == 4
    assert math.fsum(p for _, p in successors) == pytest.approx(1.0)
    for succ, p in successors:
        assert succ.action_set() == ONE_TWO
        assert transition_prob(state, 1, succ, 0, tiny) == pytest.approx(p)
    unrelated = MdpState(1, {(): ZERO, (0,): ZERO})
    assert transition_prob(state, 1, unrelated, 0, tiny) == 0.0


def test_sampled_transition_is_a_listed_successor(tiny, seed):
    state = MdpState(1, {(): ONE_TWO, (1,): ONE_TWO, (2,): ZERO})
    listed = {s.digest for s, _ in enumerate_transitions(state, 2, 0, tiny)}
    rng = seeding.generator(seed, "t")
    for _ in range(20):
        assert transition_sample(state, 2, 0, tiny, rng).digest in listed
    with pytest.raises(IllegalActionError):
        transition_sample(state, 0, 0, tiny, rng)


def test_enumeration_cap():
    with pytest.raises(EnumerationBudgetError) as info:
        enumerate_states(example45(), 0, 1, cap=10)
    assert info.value.diagnostics["stage"] == 0


def test_exact_window_values_on_tiny_instance(tiny, always):
    assert WindowValueSolver(tiny, always, 0, 2).initial_value(0) == pytest.approx(0.25)
    assert WindowValueSolver(tiny, always, 1, 2).initial_value(0) == pytest.approx(0.375)


def _brute_force_value(family, goal, m, end):
    """Best deterministic strategy table over stage-0 states; later stages play any accepted action."""
    states = enumerate_states(family, 0, m)
    solver = WindowValueSolver(family, goal, m, end)
    best = 0.0
    tables = itertools.product(*[list(s.action_set()) for s, _ in states])
    for table in tables:
        total = 0.0
        for (s, p), a in zip(states, table):
            if not goal.accepts(0, a):
                continue
            total += p * math.fsum(q * solver.value(1, succ) for succ, q in enumerate_transitions(s, a, 0, family))
        best = max(best, total)
    return best


@pytest.mark.parametrize("m,expected", [(0, 0.25), (1, 0.375)])
def test_brute_force_strategy_tables_match_backward_induction(tiny, always, m, expected):
    assert _brute_force_value(tiny, always, m, 2) == pytest.approx(expected)


def test_finite_horizon_value_edge_cases(tiny, always):
    state = MdpState(1, {(): ONE_TWO, (1,): ZERO, (2,): ZERO})
    assert finite_horizon_value(tiny, always, 1, 0, state, 0) == 1.0
    assert finite_horizon_value(tiny, always, 1, 0, state, 2) == 0.0
    assert finite_horizon_value(tiny, always, 1, 0, state, 1) == 1.0


def test_solver_needs_an_always_goal(tiny):
    with pytest.raises(ConfigError):
        WindowValueSolver(tiny, eventually_nonzero(), 1, 3)


def test_strategies_reach_the_exact_values(tiny, always, seed, z):
    n = 4000
    one_step = estimate_strategy_success(tiny, one_step_maximizing_strategy(), always, 2, n, seed, z=z)
    blind = estimate_strategy_success(tiny, smallest_action_strategy(), always, 2, n, seed, z=z)
    assert one_step.agrees_with(0.375)
    assert blind.agrees_with(0.25)


def test_state_predicates():
    state = MdpState(1, {(): ONE_TWO, (1,): ONE_TWO, (2,): ZERO})
    assert state_predicate_from_config("root-nonzero")(state)
    assert state_predicate_from_config("size<=2")(state)
    assert not state_predicate_from_config("size > 2")(state)
    assert state_predicate_from_config("all")(state) and not state_predicate_from_config("none")(state)
    with pytest.raises(ConfigError):
        state_predicate_from_config("size~3")


def test_empirical_phi_matches_enumeration(tiny, seed, z):
    n = 4000
    law = state_distribution_phi(tiny, 0, 1, n, seed)
    for s, p in enumerate_states(tiny, 0, 1):
        assert abs(law.frequency(s.digest) - p) <= z * math.sqrt(p * (1 - p) / n)
    assert law.mass(lambda s: True) == 1.0


def test_step1_on_tiny_instance(tiny, seed, z):
    result = check_step1(tiny, 1, 0, state_predicate_from_config("root-nonzero"), smallest_action_strategy(),
                         3000, seed, z=z, min_occupancy=50)
    assert result.passed
    assert result.details["rhs"] == pytest.approx(0.5, abs=0.05)
    with pytest.raises(StrategyError):
        check_step1(tiny, 1, 0, lambda s: True, one_step_maximizing_strategy(), 10, seed)


def test_step4_on_tiny_instance(tiny, seed, z):
    result = check_step4(tiny, 1, 0, state_predicate_from_config("root-nonzero"), one_step_maximizing_strategy(),
                         3000, seed, z=z, min_occupancy=50)
    assert result.passed
    assert all(row["size"] >= 1 for row in result.details["bins"])


def test_step5_bound_on_tiny_instance(tiny, always):
    result = check_step5_bound(tiny, always, 1, 0, 3)
    assert result.passed
    assert 0.0 <= result.details["good_state_mass"] <= 1.0
    assert len(result.details["states"]) == 6


def test_step6_dominance_on_tiny_instance(tiny, seed):
    q = cardinality_law(tiny.at(0))
    result = check_step6_dominance(tiny, 1, q, one_step_maximizing_strategy(), 3, 2000, seed, alpha=1e-4,
                                   min_occupancy=50)
    assert result.passed
    assert [row["mbp_index"] for row in result.details["unconditional"]] == [0, 1, 2]


@pytest.mark.parametrize("fixture, top", [("tiny", 4), ("dummy", 1)])
def test_step6_matches_indices_at_foresight_two(request, fixture, top, seed):
    family = request.getfixturevalue(fixture)
    result = check_step6_dominance(family, 2, CardinalityLaw.dirac(top), one_step_maximizing_strategy(), 3, 500,
                                   seed, min_occupancy=50)
    assert result.passed
    rows = result.details["unconditional"]
    assert [row["stage"] for row in rows] == [0, 2, 4]
    assert [row["mbp_index"] for row in rows] == [0, 1, 2]
    # both processes start from the same u(s_0)
    assert rows[0]["worst_gap"] == 0.0


def test_value_supermartingale_on_tiny_instance(tiny, always, seed, z):
    result = check_value_supermartingale(tiny, always, 1, one_step_maximizing_strategy(), 3, 1500, seed, z=z,
                                         min_occupancy=50)
    assert result.passed
    assert result.details["cells"]


def test_size_matches_actions(tiny, seed):
    assert check_size_matches_actions(tiny, 4, 200, seed).passed
