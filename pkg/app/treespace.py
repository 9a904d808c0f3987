# app/treespace.py
"""
Sampling and access for truncated decision trees under mu_t = p_t ⊓ p_{t+1} ⊓ ...

Every node carries a 64-bit key derived from its parent's key and its last
action; the node's action set is picked by the uniform hashed from that key.
`sample_tree` materialises a tree breadth-first, `LazyTree` resolves only the
nodes it is asked about. Both give identical action sets for the same seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol

import numpy as np

from app import seeding
from app.actionset import ActionSet
from app.distmodel import DistributionFamily
from app.exceptions import NodeBudgetExceededError, TreeError, TreeFormatError, UnknownNodeError
from app.models.state import MdpState

logger = logging.getLogger(__name__)

Path = tuple[int, ...]
DEFAULT_NODE_BUDGET = 10_000_000


class TreeView(Protocol):
    """Read access shared by full and lazy trees."""
    origin_stage: int

    def action_set(self, h: Path) -> ActionSet: ...

    def child_sets(self, h: Path) -> tuple[ActionSet, list[ActionSet]]: ...

    def fragment(self, h: Path, m: int) -> MdpState: ...


class NodeSampler:
    """Node-keyed draw of action sets for one (family, origin stage, seed)."""

    def __init__(self, family: DistributionFamily, t0: int, seed: int):
        self.family = family
        self.t0 = t0
        self.seed = seed

    def root_key(self) -> int:
        return seeding.root_key(self.seed, self.t0)

    def set_for(self, key: int, depth: int) -> ActionSet:
        dist = self.family.at(self.t0 + depth)
        return dist.sets[int(dist.pick(seeding.key_uniform(key)))]

    def expand(self, key: int, depth: int, aset: ActionSet) -> tuple[np.ndarray, np.ndarray]:
        """Child keys and child set indices (into p_{t0+depth+1}) for every action of `aset`."""
        keys = seeding.child_keys(key, aset.to_array())
        dist = self.family.at(self.t0 + depth + 1)
        return keys, dist.pick(seeding.key_uniforms(keys))


# --- Full trees ---
@dataclass(frozen=True)
class TruncatedTree:
    depth: int
    origin_stage: int
    children: Mapping[Path, ActionSet]

    def action_set(self, h: Path) -> ActionSet:
        try:
            return self.children[tuple(h)]
        except KeyError:
            raise UnknownNodeError(f"Node {h} is not an internal node of this tree.") from None

    def child_sets(self, h: Path) -> tuple[ActionSet, list[ActionSet]]:
        aset = self.action_set(h)
        return aset, [self.action_set(tuple(h) + (a,)) for a in aset]

    def fragment(self, h: Path, m: int) -> MdpState:
        if len(h) + m >= self.depth:
            raise TreeError(f"Depth-{m + 1} fragment at {h} exceeds tree depth {self.depth}.")
        return _fragment(self, tuple(h), m)

    def __len__(self) -> int:
        return len(self.children)


def _fragment(view: TreeView, h: Path, m: int) -> MdpState:
    nodes: dict[Path, ActionSet] = {(): view.action_set(h)}
    frontier: list[Path] = [()]
    for _ in range(m):
        next_frontier = []
        for rel in frontier:
            aset, sets = view.child_sets(h + rel)
            for a, child in zip(aset, sets):
                nodes[rel + (a,)] = child
                next_frontier.append(rel + (a,))
        frontier = next_frontier
    return MdpState(m, nodes)


def sample_tree(family: DistributionFamily, t0: int, depth: int, seed: int,
                node_budget: int = DEFAULT_NODE_BUDGET) -> TruncatedTree:
    """
    Samples the first `depth` generations of a tree under mu_{t0}.

    Raises:
        NodeBudgetExceededError: if the tree would hold more than `node_budget` nodes.
    """
    if depth < 1:
        raise TreeError(f"Tree depth must be at least 1, got {depth}.")
    sampler = NodeSampler(family, t0, seed)
    key = sampler.root_key()
    children: dict[Path, ActionSet] = {(): sampler.set_for(key, 0)}
    frontier: list[tuple[Path, int]] = [((), key)]
    nodes = 1
    for k in range(depth - 1):
        dist = family.at(t0 + k + 1)
        next_frontier: list[tuple[Path, int]] = []
        for path, node_key in frontier:
            aset = children[path]
            nodes += len(aset)
            if nodes > node_budget:
                raise NodeBudgetExceededError(f"Sampled tree exceeds the node budget of {node_budget} at generation {k + 1}.")
            keys, idx = sampler.expand(node_key, k, aset)
            for a, ck, i in zip(aset, keys.tolist(), idx.tolist()):
                child = path + (a,)
                children[child] = dist.sets[i]
                next_frontier.append((child, ck))
        frontier = next_frontier
    return TruncatedTree(depth, t0, children)


# --- Lazy cones ---
class LazyTree:
    """
    A tree under mu_{t0} whose nodes are drawn on first access.

    Node sets agree with `sample_tree(family, t0, T, seed)` for every T.
    """

    def __init__(self, family: DistributionFamily, t0: int, seed: int,
                 node_budget: int = DEFAULT_NODE_BUDGET):
        self.family = family
        self.origin_stage = t0
        self.seed = seed
        self.node_budget = node_budget
        self._sampler = NodeSampler(family, t0, seed)
        root_key = self._sampler.root_key()
        self._keys: dict[Path, int] = {(): root_key}
        self._sets: dict[Path, ActionSet] = {(): self._sampler.set_for(root_key, 0)}
        self._expanded: dict[Path, tuple[np.ndarray, np.ndarray]] = {}
        self.nodes_drawn = 1

    def _charge(self, n: int) -> None:
        self.nodes_drawn += n
        if self.nodes_drawn > self.node_budget:
            raise NodeBudgetExceededError(f"Revealed cone exceeds the node budget of {self.node_budget}.")

    def _resolve(self, h: Path) -> None:
        parent = h[:-1]
        a = h[-1]
        parent_set = self.action_set(parent)
        if a not in parent_set:
            raise UnknownNodeError(f"Action {a} is not available at node {parent}.")
        expanded = self._expanded.get(parent)
        if expanded is not None:
            i = parent_set.index_of(a)
            self._keys[h] = int(expanded[0][i])
            dist = self.family.at(self.origin_stage + len(h))
            self._sets[h] = dist.sets[int(expanded[1][i])]
            return
        self._charge(1)
        key = seeding.child_key(self._keys[parent], a)
        self._keys[h] = key
        self._sets[h] = self._sampler.set_for(key, len(h))

    def action_set(self, h: Path) -> ActionSet:
        h = tuple(h)
        found = self._sets.get(h)
        if found is None:
            self._resolve(h)
            found = self._sets[h]
        return found

    def expand(self, h: Path) -> tuple[ActionSet, np.ndarray]:
        """The set at h and the indices (into p_{t0+|h|+1}) of all its children's sets."""
        h = tuple(h)
        aset = self.action_set(h)
        expanded = self._expanded.get(h)
        if expanded is None:
            self._charge(len(aset))
            expanded = self._sampler.expand(self._keys[h], len(h), aset)
            self._expanded[h] = expanded
        return aset, expanded[1]

    def child_sizes(self, h: Path) -> tuple[ActionSet, np.ndarray]:
        """Sizes of every child's action set, aligned with the parent's actions."""
        aset, idx = self.expand(h)
        sizes = self.family.at(self.origin_stage + len(h) + 1).size_array
        return aset, sizes[idx]

    def child_sets(self, h: Path) -> tuple[ActionSet, list[ActionSet]]:
        aset, idx = self.expand(h)
        sets = self.family.at(self.origin_stage + len(h) + 1).sets
        return aset, [sets[i] for i in idx.tolist()]

    def fragment(self, h: Path, m: int) -> MdpState:
        return _fragment(self, tuple(h), m)


# --- Accessors ---
def action_set(tree: TruncatedTree, h: Path) -> ActionSet:
    return tree.action_set(h)


def generation(tree: TruncatedTree, n: int) -> list[Path]:
    """Nodes of length n, in lexicographic order."""
    if not 0 <= n <= tree.depth:
        raise TreeError(f"Generation {n} is outside 0..{tree.depth}.")
    if n == 0:
        return [()]
    parents = [p for p in tree.children if len(p) == n - 1]
    return sorted(p + (a,) for p in parents for a in tree.children[p])


def generation_size(tree: TruncatedTree, n: int) -> int:
    if not 0 <= n <= tree.depth:
        raise TreeError(f"Generation {n} is outside 0..{tree.depth}.")
    if n == 0:
        return 1
    return sum(len(s) for p, s in tree.children.items() if len(p) == n - 1)


def generation_sizes(tree: TruncatedTree) -> list[int]:
    sizes = [1] + [0] * tree.depth
    for p, s in tree.children.items():
        sizes[len(p) + 1] += len(s)
    return sizes


def subtree(tree: TruncatedTree, h: Path) -> TruncatedTree:
    """
    The subtree at h, re-indexed to origin t0+|h| and depth T-|h|.

    Raises:
        UnknownNodeError: if h is not in the tree.
        TreeError: if h sits at the truncation depth, where no set is drawn.
    """
    h = tuple(h)
    if len(h) > tree.depth:
        raise UnknownNodeError(f"Node {h} is deeper than the tree.")
    if h and len(h) == tree.depth:
        raise TreeError(f"Node {h} is at the truncation depth {tree.depth} and has no action set.")
    if h and h[:-1] not in tree.children or (h and h[-1] not in tree.children[h[:-1]]):
        raise UnknownNodeError(f"Node {h} is not in the tree.")
    k = len(h)
    children = {p[k:]: s for p, s in tree.children.items() if p[:k] == h}
    return TruncatedTree(tree.depth - k, tree.origin_stage + k, children)


def prefix_probability(tree: TruncatedTree, upto: int, family: DistributionFamily) -> float:
    """log mu({eta: eta_t = omega_t}) = sum over nodes of length < t of log p(A(h))."""
    if not 0 <= upto <= tree.depth:
        raise TreeError(f"Prefix length {upto} is outside 0..{tree.depth}.")
    total = 0.0
    for path, aset in tree.children.items():
        if len(path) < upto:
            total += family.at(tree.origin_stage + len(path)).log_mass(aset)
            if total == -math.inf:
                return -math.inf
    return total


def validate_tree(tree: TruncatedTree) -> None:
    """Checks prefix-closure and that every node above depth T has a set."""
    for path, aset in tree.children.items():
        if len(path) >= tree.depth:
            raise TreeFormatError(f"Node {path} is at or below the truncation depth.")
        if path and (path[:-1] not in tree.children or path[-1] not in tree.children[path[:-1]]):
            raise TreeFormatError(f"Node {path} has no parent in the tree.")
        if len(path) < tree.depth - 1:
            for a in aset:
                if path + (a,) not in tree.children:
                    raise TreeFormatError(f"Internal node {path + (a,)} has no action set.")
    if () not in tree.children:
        raise TreeFormatError("Tree has no root.")


def cylinder_frequency(family: DistributionFamily, t0: int, target: TruncatedTree, upto: int,
                       n: int, seed: int) -> int:
    """
    Number of n lazily sampled trees whose first `upto` generations equal the target's.

    Each sample stops at its first mismatching node.
    """
    nodes = sorted((p for p in target.children if len(p) < upto), key=lambda p: (len(p), p))
    hits = 0
    for i in range(n):
        view = LazyTree(family, t0, seeding.derive_seed(seed, "tree", i))
        try:
            if all(view.action_set(p) == target.children[p] for p in nodes):
                hits += 1
        except UnknownNodeError:
            continue
    return hits


# --- Text format ---
def _path_text(path: Path) -> str:
    return "." if not path else ".".join(str(a) for a in path)


def dump_tree(tree: TruncatedTree) -> str:
    """One row per internal node: `path<TAB>action-set`, after a header line."""
    lines = [f"# depth={tree.depth} origin={tree.origin_stage}"]
    for path in sorted(tree.children, key=lambda p: (len(p), p)):
        lines.append(f"{_path_text(path)}\t{tree.children[path]}")
    return "\n".join(lines) + "\n"


def load_tree(text: str) -> TruncatedTree:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# depth="):
        raise TreeFormatError("Missing tree header line.")
    try:
        header = dict(part.split("=", 1) for part in lines[0][2:].split())
        depth, origin = int(header["depth"]), int(header["origin"])
    except (KeyError, ValueError) as e:
        raise TreeFormatError(f"Malformed header '{lines[0]}'.") from e
    children: dict[Path, ActionSet] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        try:
            path_text, set_text = line.split("\t")
            path = () if path_text == "." else tuple(int(a) for a in path_text.split("."))
        except ValueError as e:
            raise TreeFormatError(f"Malformed tree row '{line}'.") from e
        children[path] = ActionSet.parse(set_text)
    tree = TruncatedTree(depth, origin, children)
    validate_tree(tree)
    return tree


def trees_to_text(trees: Iterable[TruncatedTree]) -> str:
    """Concatenates serialized trees, separated by blank lines."""
    return "\n".join(dump_tree(t) for t in trees)
