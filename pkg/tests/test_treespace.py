import math

import pytest

from app.actionset import ActionSet
from app.distmodel import DistributionFamily, PrimitiveDistribution
from app.exceptions import NodeBudgetExceededError, TreeError, TreeFormatError, UnknownNodeError
from app.families import example42, example45, tiny_instance
from app.treespace import (
    LazyTree,
    TruncatedTree,
    cylinder_frequency,
    dump_tree,
    generation,
    generation_size,
    generation_sizes,
    load_tree,
    prefix_probability,
    sample_tree,
    subtree,
    trees_to_text,
    validate_tree,
)


def test_sampled_tree_is_prefix_closed(tiny, seed):
    tree = sample_tree(tiny, 0, 4, seed)
    validate_tree(tree)
    assert tree.depth == 4
    assert generation_sizes(tree) == [generation_size(tree, k) for k in range(5)]
    assert len(generation(tree, 2)) == generation_size(tree, 2)


def test_dummy_tree_is_a_single_path(dummy, seed):
    tree = sample_tree(dummy, 0, 6, seed)
    assert generation_sizes(tree) == [1] * 7
    assert all(s == ActionSet.singleton(0) for s in tree.children.values())


def test_lazy_tree_agrees_with_full_tree(e42, seed):
    for s in range(seed, seed + 20):
        tree = sample_tree(e42, 0, 3, s)
        lazy = LazyTree(e42, 0, s)
        # reverse order mixes lazily resolved and expanded nodes
        for path in sorted(tree.children, reverse=True):
            assert lazy.action_set(path) == tree.children[path]


def test_lazy_tree_rejects_unavailable_actions(dummy, seed):
    lazy = LazyTree(dummy, 0, seed)
    with pytest.raises(UnknownNodeError):
        lazy.action_set((1,))


def test_node_budget_is_enforced(seed):
    wide = DistributionFamily("wide", lambda _t: PrimitiveDistribution.dirac(ActionSet.interval(0, 9)), True)
    with pytest.raises(NodeBudgetExceededError):
        sample_tree(wide, 0, 3, seed, node_budget=10)
    lazy = LazyTree(example45(), 0, seed, node_budget=1)
    with pytest.raises(NodeBudgetExceededError):
        lazy.expand(())


def test_different_seeds_give_different_trees(tiny):
    trees = {dump_tree(sample_tree(tiny, 0, 4, s)) for s in range(20)}
    assert len(trees) > 1


def test_dump_and_load(tiny, seed):
    tree = sample_tree(tiny, 1, 3, seed)
    text = dump_tree(tree)
    assert text.startswith("# depth=3 origin=1")
    loaded = load_tree(text)
    assert loaded == tree
    assert trees_to_text([tree, tree]).count("# depth=") == 2


@pytest.mark.parametrize("text", ["", "depth=2\n", "# depth=2 origin=0\n.\tx\n", "# depth=2 origin=0\n0\t1\n"])
def test_load_rejects_malformed_text(text):
    with pytest.raises(TreeFormatError):
        load_tree(text)


def test_subtree_reindexes_origin(tiny, seed):
    tree = sample_tree(tiny, 0, 4, seed)
    a = tree.children[()].min()
    sub = subtree(tree, (a,))
    assert sub.origin_stage == 1 and sub.depth == 3
    assert sub.children[()] == tree.children[(a,)]
    with pytest.raises(UnknownNodeError):
        subtree(tree, (99,))


def test_subtree_at_truncation_depth_is_rejected(tiny, seed):
    tree = sample_tree(tiny, 0, 2, seed)
    a = tree.children[()].min()
    b = tree.children[(a,)].min()
    assert subtree(tree, (a,)).children[()] == tree.children[(a,)]
    with pytest.raises(TreeError) as excinfo:
        subtree(tree, (a, b))
    assert excinfo.type is TreeError


def test_prefix_probability_is_sum_of_log_masses():
    zero = ActionSet.singleton(0)
    tree = TruncatedTree(3, 0, {(): zero, (0,): zero, (0, 0): zero})
    expected = sum(math.log(1 - 2.0 ** -(k + 1)) for k in range(3))
    assert prefix_probability(tree, 3, example42()) == pytest.approx(expected)
    assert prefix_probability(tree, 0, example42()) == 0.0
    with pytest.raises(TreeError):
        prefix_probability(tree, 4, example42())


def test_prefix_probability_of_impossible_tree_is_minus_infinity():
    tree = TruncatedTree(1, 0, {(): ActionSet.singleton(7)})
    assert prefix_probability(tree, 1, tiny_instance()) == -math.inf


def test_fragment_depth_guard(tiny, seed):
    tree = sample_tree(tiny, 0, 3, seed)
    assert tree.fragment((), 1).m == 1
    with pytest.raises(TreeError):
        tree.fragment((), 3)


def test_cylinder_frequency_matches_mass(seed, z):
    zero = ActionSet.singleton(0)
    target = TruncatedTree(2, 0, {(): zero, (0,): zero})
    n = 4000
    hits = cylinder_frequency(example42(), 0, target, 2, n, seed)
    p = 0.5 * 0.75
    assert abs(hits / n - p) <= z * math.sqrt(p * (1 - p) / n)
