import pytest

from app.actionset import ActionSet
from app.exceptions import ConfigError
from app.goals import (
    always_nonzero,
    block_of,
    eventually_nonzero,
    goal_from_config,
    make_partition,
    partition_escape,
    prefix_status,
    shift,
    shift_inclusion_report,
)


def test_nonzero_predicate_counts_without_enumeration():
    goal = eventually_nonzero()
    aset = ActionSet.interval(0, 2 ** 50)
    assert goal.count_accepted(3, aset) == 2 ** 50
    assert list(goal.accepted_actions(0, ActionSet.of([0, 4, 5]))) == [4, 5]


def test_shift_of_time_invariant_goal_is_itself():
    goal = eventually_nonzero()
    assert shift(goal, 5) == goal
    assert shift(always_nonzero(from_stage=7), 3).from_stage == 4
    assert shift(always_nonzero(from_stage=2), 5).from_stage == 0


def test_shift_of_partition_goal_moves_the_predicate():
    goal = partition_escape(make_partition([1, 2, 4, 8]))
    shifted = shift(goal, 1)
    # action 3 lies in block 2: accepted at stage 0 of G (block >= 1) and of G_1 (block >= 2)
    assert goal.accepts(0, 3) and shifted.accepts(0, 3)
    # action 1 lies in block 1: accepted by G at stage 0 only
    assert goal.accepts(0, 1) and not shifted.accepts(0, 1)
    assert shifted.name.startswith("shifted(")


def test_shift_rejects_negative():
    with pytest.raises(ValueError):
        shift(eventually_nonzero(), -1)


def test_partition_blocks_and_overflow():
    partition = make_partition([1, 2, 4])
    assert [block_of(partition, a) for a in (0, 1, 2, 3, 6, 7, 100)] == [0, 1, 1, 2, 2, 3, 3]
    assert partition.block(1) == ActionSet.interval(1, 2)
    with pytest.raises(ConfigError):
        make_partition([1, 0])


def test_partition_counter_agrees_with_predicate():
    goal = partition_escape(make_partition([1, 2, 4, 8]))
    aset = ActionSet.interval(0, 20)
    for t in range(4):
        assert goal.count_accepted(t, aset) == sum(1 for a in aset if goal.accepts(t, a))


def test_prefix_status_for_always_goal():
    goal = always_nonzero(from_stage=1)
    assert prefix_status(goal, [0, 3, 1], 3).kind == "holds"
    assert prefix_status(goal, [0, 3, 1], 3).window == 1
    assert prefix_status(goal, [1, 0, 1], 3).kind == "violated"


def test_prefix_status_for_eventually_goal():
    goal = eventually_nonzero()
    status = prefix_status(goal, [0, 0, 1, 2, 3, 4], 6)
    assert status.kind == "holds" and status.window == 2
    assert str(status) == "HoldsOnWindow(2)"
    assert prefix_status(goal, [1, 1, 1, 1, 0, 1], 6).kind == "violated"
    assert prefix_status(goal, [1, 1, 1, 1, 0, 1], 6, k_max=5).window == 5
    assert prefix_status(goal, [], 0).kind == "undetermined"
    with pytest.raises(ValueError):
        prefix_status(goal, [1, 2], 3)


def test_window_start_respects_from_stage():
    assert always_nonzero(from_stage=3).window_start(1) == 3
    assert always_nonzero(from_stage=3).window_start(5) == 5
    assert eventually_nonzero().window_start(2) == 2


def test_shift_inclusion_for_partition_goal():
    goal = partition_escape(make_partition([1, 2, 4, 8, 16]))
    report = shift_inclusion_report(goal, 1, range(3), range(31))
    assert report == {"shifted_subset_of_goal": True, "goal_subset_of_shifted": False}


def test_goal_from_config_forms():
    assert goal_from_config("eventually-nonzero").kind == "eventually_always"
    assert goal_from_config({"name": "always-nonzero", "params": {"from_stage": 2}}).from_stage == 2
    escape = goal_from_config({"name": "partition-escape", "params": {"block_sizes": [1, 2, 4]}})
    assert escape.accepts(0, 1)
    shifted = goal_from_config("shifted(always-nonzero, 3)")
    assert shifted.kind == "always"


@pytest.mark.parametrize("spec", ["nope", {"params": {}}, {"name": "always-nonzero", "x": 1},
                                  {"name": "always-nonzero", "params": {"bad": 1}}])
def test_goal_from_config_rejects_bad_specs(spec):
    with pytest.raises(ConfigError):
        goal_from_config(spec)
