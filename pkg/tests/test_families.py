import math

import pytest

from app.actionset import ActionSet
from app.distmodel import cardinality_law, law_moments
from app.exceptions import ConfigError, DistributionError
from app.families import (
    EXAMPLE42_CORRECTION,
    Example43Params,
    example42,
    example42_big_set,
    example42_literal,
    example43,
    example43_conditions,
    example43_genuine,
    example43_printed_sequence,
    example43_sequence,
    example43_small_params,
    example45,
    example45_q,
    family_from_config,
    tiny_instance,
)


def test_example42_stage_masses():
    family = example42()
    for t in range(6):
        dist = family.at(t)
        assert dist.mass_of(ActionSet.singleton(0)) == pytest.approx(1 - 2.0 ** -(t + 1))
        assert dist.mass_of(example42_big_set(t)) == pytest.approx(2.0 ** -(t + 1))
        assert len(example42_big_set(t)) == (t + 1) * 2 ** (t + 1) + 1
    assert family.note == EXAMPLE42_CORRECTION
    assert "advanced by one stage" in family.note


def test_example42_literal_stage_zero_is_dirac():
    dist = example42_literal().at(0)
    assert dist.sets == (ActionSet.singleton(0),)


def test_example43_params_validation():
    with pytest.raises(DistributionError):
        Example43Params((1, 2), (0.5, 0.4))
    with pytest.raises(DistributionError):
        Example43Params((1, 2), (0.5, 0.9))


def test_example43_small_family_is_time_invariant_block_choice():
    params = example43_small_params()
    family = example43(params)
    assert family.time_invariant
    dist = family.at(5)
    assert dist.mass_of(params.block(0)) == pytest.approx(0.3)
    assert dist.mass_of(params.block(3)) == pytest.approx(0.15)
    assert params.block(2) == ActionSet.interval(3, 6)


def test_printed_sequence_fails_condition_a():
    conditions = example43_conditions(*example43_printed_sequence(6))
    assert not conditions["a_holds"]


def test_shipped_sequence_satisfies_all_conditions():
    log_m, log_neg_log_r = example43_sequence(8)
    assert log_m[1] == pytest.approx(math.log(8))
    assert log_m[2] == pytest.approx(math.log(27 * 8))
    conditions = example43_conditions(log_m, log_neg_log_r)
    assert conditions["a_holds"] and conditions["b_holds"] and conditions["c_holds"]


def test_genuine_family_materialises_three_blocks():
    dist = example43_genuine(3).at(0)
    assert sorted(len(a) for a in dist.sets) == [1, 8, 216]
    assert math.fsum(dist.masses) == pytest.approx(1.0)


def test_example45_stage_law():
    dist = example45().at(2)
    assert len(dist.sets) == 13
    assert dist.mass_of(ActionSet.singleton(0)) == pytest.approx(1 - 0.25 * 2.0 ** -2 * (2 - 2.0 ** -11))
    assert dist.mass_of(ActionSet.interval(0, 2 ** 2)) == pytest.approx(0.25 * 2.0 ** -2)


def test_example45_stage_zero_has_mean_four():
    assert law_moments(cardinality_law(example45().at(0))).mean == pytest.approx(4.0, rel=1e-9)


def test_example45_q_has_infinite_mean():
    assert not law_moments(example45_q()).mean_finite


def test_tiny_instance_cardinality():
    assert cardinality_law(tiny_instance().at(0)).pmf == pytest.approx({1: 0.5, 2: 0.5})


def test_family_from_config_builtin_and_table():
    assert family_from_config("example45").name == "example45"
    assert family_from_config({"builtin": "dirac-singletons", "params": {"action": 3}}).at(0).sets[0] == \
        ActionSet.singleton(3)
    table = family_from_config({"table": {
        "stages": {0: [{"set": "1..2", "mass": 1.0}]},
        "default": [{"set": 0, "mass": 0.5}, {"set": [1, 4], "mass": 0.5}],
    }})
    assert table.at(0).sets == (ActionSet.interval(1, 2),)
    assert table.at(7).mass_of(ActionSet.of([1, 4])) == pytest.approx(0.5)


@pytest.mark.parametrize("spec", [
    "no-such-family",
    {"builtin": "example45", "extra": 1},
    {"table": {"stages": {0: [{"set": "1", "mass": 0.7}]}}},
    {"table": {"default": [{"set": "1"}]}},
    42,
])
def test_family_from_config_rejects_bad_specs(spec):
    with pytest.raises(ConfigError):
        family_from_config(spec)
