# app/models/state.py
"""
The information revealed under m-foresight: a depth-(m+1) fragment of a tree.

An `MdpState` stores the action sets of every node at relative depth 0..m
below the current node. Its set of length-(m+1) action sequences is exactly
the set of root-to-leaf paths of the fragment, so the two descriptions are
interchangeable; the fragment form stays small even when the sequence set
is huge.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from app.actionset import ActionSet
from app.exceptions import TreeError

Path = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class MdpState:
    m: int
    nodes: Mapping[Path, ActionSet] = field(repr=False)

    def __post_init__(self):
        if () not in self.nodes:
            raise TreeError("A state needs the action set of its root node.")

    # --- Constructors ---
    @classmethod
    def from_sequences(cls, sequences: Iterable[Iterable[int]], m: int) -> MdpState:
        """Builds a state from its non-empty set of length-(m+1) sequences."""
        grouped: dict[Path, set[int]] = {}
        count = 0
        for seq in sequences:
            seq = tuple(int(a) for a in seq)
            if len(seq) != m + 1:
                raise TreeError(f"Sequence {seq} does not have length {m + 1}.")
            count += 1
            for d in range(m + 1):
                grouped.setdefault(seq[:d], set()).add(seq[d])
        if not count:
            raise TreeError("A state must contain at least one sequence.")
        return cls(m, {path: ActionSet.of(actions) for path, actions in grouped.items()})

    # --- Views ---
    def action_set(self) -> ActionSet:
        return self.nodes[()]

    def sequences(self) -> Iterator[Path]:
        """All length-(m+1) sequences, in lexicographic order."""
        def walk(prefix: Path) -> Iterator[Path]:
            for a in self.nodes[prefix]:
                path = prefix + (a,)
                if len(path) == self.m + 1:
                    yield path
                else:
                    yield from walk(path)
        return walk(())

    def continuations(self, a0: int) -> Iterator[Path]:
        """Length-m continuations (a_1..a_m) of first action a0."""
        if self.m == 0:
            yield ()
            return
        for seq in self._walk_from((a0,)):
            yield seq[1:]

    def _walk_from(self, prefix: Path) -> Iterator[Path]:
        if len(prefix) == self.m + 1:
            yield prefix
            return
        for a in self.nodes[prefix]:
            yield from self._walk_from(prefix + (a,))

    def continuation_count(self, a0: int) -> int:
        if self.m == 0:
            return 1

        def count(prefix: Path) -> int:
            aset = self.nodes[prefix]
            if len(prefix) == self.m:
                return len(aset)
            return sum(count(prefix + (a,)) for a in aset)

        return count((a0,))

    @cached_property
    def size(self) -> int:
        """u(s): the largest number of length-m continuations of one first action."""
        if self.m == 0:
            return 1
        return max(self.continuation_count(a) for a in self.action_set())

    def leaves(self) -> Iterator[Path]:
        """Nodes at relative depth m (their sets are the last coordinates)."""
        return (p for p in self.nodes if len(p) == self.m)

    @cached_property
    def digest(self) -> str:
        """Canonical hash of the fragment (equivalently, of the sequence set)."""
        h = hashlib.blake2b(digest_size=16)
        for path in sorted(self.nodes, key=lambda p: (len(p), p)):
            h.update((".".join(map(str, path)) + "\t" + str(self.nodes[path]) + "\n").encode("utf-8"))
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MdpState) and self.m == other.m and self.digest == other.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def __repr__(self) -> str:
        return f"MdpState(m={self.m}, root={self.nodes[()]}, digest={self.digest[:8]})"


@dataclass(frozen=True)
class RevealedState:
    """What the Controller sees at `stage`: the current m-foresight fragment."""
    stage: int
    state: MdpState

    @property
    def actions(self) -> ActionSet:
        return self.state.action_set()
