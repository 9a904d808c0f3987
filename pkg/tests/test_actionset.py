import numpy as np
import pytest

from app.actionset import ActionSet
from app.exceptions import DistributionError, TreeFormatError


def test_runs_are_merged_and_sorted():
    aset = ActionSet([(5, 7), (0, 3), (3, 4)])
    assert aset.runs == ((0, 4), (5, 7))
    assert list(aset) == [0, 1, 2, 3, 5, 6]
    assert len(aset) == 6


def test_empty_and_negative_sets_are_rejected():
    with pytest.raises(DistributionError):
        ActionSet([])
    with pytest.raises(DistributionError):
        ActionSet.of([-1, 2])


def test_text_form_parses_back():
    aset = ActionSet.parse("0..24,30")
    assert str(aset) == "0..24,30"
    assert len(aset) == 26
    assert ActionSet.parse(str(aset)) == aset


def test_malformed_text_raises_format_error():
    with pytest.raises(TreeFormatError):
        ActionSet.parse("0..x")


def test_large_interval_is_cheap_to_query():
    aset = ActionSet.interval(0, 2 ** 40)
    assert len(aset) == 2 ** 40 + 1
    assert 2 ** 39 in aset
    assert aset.nonzero_count() == 2 ** 40
    assert aset.count_at_least(2 ** 40) == 1


def test_element_at_and_index_of_are_inverse():
    aset = ActionSet.of([1, 2, 3, 10, 11, 40])
    for i in range(len(aset)):
        assert aset.index_of(aset.element_at(i)) == i
    with pytest.raises(KeyError):
        aset.index_of(5)
    with pytest.raises(IndexError):
        aset.element_at(len(aset))


def test_membership_accepts_numpy_integers_only_for_ints():
    aset = ActionSet.interval(2, 4)
    assert np.int64(3) in aset
    assert 1 not in aset
    assert "3" not in aset


def test_to_array_matches_iteration():
    aset = ActionSet.of([0, 1, 7, 8, 9])
    assert aset.to_array().tolist() == list(aset)
    assert aset.to_array().dtype == np.uint64
