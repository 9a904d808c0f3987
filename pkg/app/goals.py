# app/goals.py
"""
Tail goals as stagewise predicates plus the window semantics used on finite prefixes.

A goal is either `always` (accept at every stage from `from_stage` on) or
`eventually_always` (accept at every stage from some point on). Shifting a
goal by t replaces its stage-s predicate with the original stage-(s+t) one.
"""
from __future__ import annotations

import bisect
import logging
import re
from dataclasses import dataclass, field, replace
from itertools import accumulate
from typing import Any, Callable, Iterable, Iterator, Literal, Optional, Sequence

from app.actionset import ActionSet
from app.exceptions import ConfigError

logger = logging.getLogger(__name__)

GoalKind = Literal["always", "eventually_always"]
StatusKind = Literal["holds", "violated", "undetermined"]


@dataclass(frozen=True)
class StagePredicate:
    """
    A pure, total predicate accept(t, a).

    `counter`, when given, counts accepted actions of a set without
    enumerating it; it must agree with `accept`.
    """
    name: str
    accept: Callable[[int, int], bool]
    time_invariant: bool = False
    counter: Optional[Callable[[int, ActionSet], int]] = field(default=None, compare=False)

    def __call__(self, t: int, a: int) -> bool:
        return bool(self.accept(t, a))

    def count(self, t: int, aset: ActionSet) -> int:
        if self.counter is not None:
            return int(self.counter(t, aset))
        return sum(1 for a in aset if self.accept(t, a))

    def accepted(self, t: int, aset: ActionSet) -> Iterator[int]:
        """Accepted actions of `aset` in ascending order."""
        return (a for a in aset if self.accept(t, a))


@dataclass(frozen=True)
class Goal:
    kind: GoalKind
    predicate: StagePredicate
    from_stage: int = 0
    shift: int = 0

    @property
    def name(self) -> str:
        base = self.predicate.name
        if self.kind == "always" and self.from_stage:
            base = f"{base}@{self.from_stage}"
        return f"shifted({base}, {self.shift})" if self.shift else base

    def accepts(self, t: int, a: int) -> bool:
        return self.predicate(t + self.shift, a)

    def count_accepted(self, t: int, aset: ActionSet) -> int:
        return self.predicate.count(t + self.shift, aset)

    def accepted_actions(self, t: int, aset: ActionSet) -> Iterator[int]:
        return self.predicate.accepted(t + self.shift, aset)

    def window_start(self, k: int = 0) -> int:
        """First constrained stage of the window surrogate with start k."""
        return max(k, self.from_stage) if self.kind == "always" else k

    def holds_on(self, path: Sequence[int], start: int, end: Optional[int] = None) -> bool:
        end = len(path) if end is None else end
        return all(self.accepts(s, path[s]) for s in range(start, end))


@dataclass(frozen=True)
class PrefixStatus:
    kind: StatusKind
    window: Optional[int] = None

    @classmethod
    def holds(cls, k: int) -> PrefixStatus:
        return cls("holds", k)

    @classmethod
    def violated(cls) -> PrefixStatus:
        return cls("violated")

    @classmethod
    def undetermined(cls) -> PrefixStatus:
        return cls("undetermined")

    def __str__(self) -> str:
        if self.kind == "holds":
            return f"HoldsOnWindow({self.window})"
        return "ViolatedAtAllWindows" if self.kind == "violated" else "Undetermined"


def shift(goal: Goal, t: int) -> Goal:
    """The t-shifted goal. Time-invariant predicates keep shift 0."""
    if t < 0:
        raise ValueError(f"Shift must be non-negative, got {t}.")
    from_stage = max(goal.from_stage - t, 0)
    new_shift = 0 if goal.predicate.time_invariant else goal.shift + t
    return replace(goal, from_stage=from_stage, shift=new_shift)


def prefix_status(goal: Goal, path: Sequence[int], horizon: int, k_max: Optional[int] = None) -> PrefixStatus:
    """
    Window status of a depth-`horizon` prefix.

    always(from k): holds on window k iff every stage in [k, T) accepts.
    eventually_always: holds on the least window k <= k_max (default T // 2)
    on which every stage accepts.
    """
    if len(path) != horizon:
        raise ValueError(f"Path length {len(path)} does not match horizon {horizon}.")
    if horizon == 0:
        return PrefixStatus.undetermined()
    if goal.kind == "always":
        k = goal.from_stage
        return PrefixStatus.holds(k) if goal.holds_on(path, k) else PrefixStatus.violated()
    k_max = horizon // 2 if k_max is None else k_max
    last_reject = -1
    for s in range(horizon - 1, -1, -1):
        if not goal.accepts(s, path[s]):
            last_reject = s
            break
    k = last_reject + 1
    return PrefixStatus.holds(k) if k <= k_max else PrefixStatus.violated()


# --- Partitions ---
@dataclass(frozen=True)
class Partition:
    """Contiguous tiling: M_0 = {0..m_0-1}, M_1 the next m_1 integers, ..."""
    block_sizes: tuple[int, ...]
    starts: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.block_sizes or any(int(m) < 1 for m in self.block_sizes):
            raise ConfigError(f"Block sizes must be positive, got {self.block_sizes}.")
        object.__setattr__(self, "starts", (0,) + tuple(accumulate(int(m) for m in self.block_sizes)))

    def block(self, t: int) -> ActionSet:
        return ActionSet.interval(self.starts[t], self.starts[t + 1] - 1)

    def start_of(self, t: int) -> int:
        """First action of block t; actions past the listed blocks form one overflow block."""
        return self.starts[min(t, len(self.block_sizes))]


def make_partition(block_sizes: Iterable[int]) -> Partition:
    return Partition(tuple(int(m) for m in block_sizes))


def block_of(partition: Partition, a: int) -> int:
    """Index t with a in M_t; len(block_sizes) for actions beyond the listed blocks."""
    return bisect.bisect_right(partition.starts, int(a)) - 1


# --- Named predicates and goals ---
NONZERO = StagePredicate(
    name="nonzero",
    accept=lambda t, a: a != 0,
    time_invariant=True,
    counter=lambda t, aset: aset.nonzero_count(),
)


def partition_escape_predicate(partition: Partition) -> StagePredicate:
    """accept(t, a) iff a lies in M_{t+1} or a later block."""
    return StagePredicate(
        name=f"partition-escape[{','.join(str(m) for m in partition.block_sizes)}]",
        accept=lambda t, a: block_of(partition, a) >= t + 1,
        counter=lambda t, aset: aset.count_at_least(partition.start_of(t + 1)),
    )


def eventually_nonzero() -> Goal:
    return Goal("eventually_always", NONZERO)


def always_nonzero(from_stage: int = 0) -> Goal:
    return Goal("always", NONZERO, from_stage=from_stage)


def partition_escape(partition: Partition, kind: GoalKind = "eventually_always") -> Goal:
    return Goal(kind, partition_escape_predicate(partition))


# --- Inclusion tests ---
def stagewise_included(inner: Goal, outer: Goal, stages: Iterable[int], actions: Iterable[int]) -> bool:
    """
    True iff every (stage, action) accepted by `inner` is accepted by `outer`
    on the probed domain. For goals of the same kind this implies inner is a
    subset of outer.
    """
    actions = list(actions)
    return all(outer.accepts(s, a) for s in stages for a in actions if inner.accepts(s, a))


def shift_inclusion_report(goal: Goal, t: int, stages: Iterable[int], actions: Iterable[int]) -> dict[str, bool]:
    """Both inclusion directions between G and G_t on a probed domain."""
    stages, actions = list(stages), list(actions)
    shifted = shift(goal, t)
    return {
        "shifted_subset_of_goal": stagewise_included(shifted, goal, stages, actions),
        "goal_subset_of_shifted": stagewise_included(goal, shifted, stages, actions),
    }


_SHIFTED = re.compile(r"^shifted\(\s*([\w\-]+)\s*,\s*(\d+)\s*\)$")


def goal_from_config(spec: Any) -> Goal:
    """
    Builds a goal from a config spec: a name, `shifted(<name>, t)`, or
    `{name: ..., params: {...}}`.
    """
    if isinstance(spec, str):
        match = _SHIFTED.match(spec.strip())
        if match:
            return shift(goal_from_config(match.group(1)), int(match.group(2)))
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"A goal spec needs a name, got {spec!r}.")
    unknown = set(spec) - {"name", "params"}
    if unknown:
        raise ConfigError(f"Unknown goal keys: {sorted(unknown)}")
    name, params = spec["name"], dict(spec.get("params") or {})
    try:
        if name == "eventually-nonzero":
            return eventually_nonzero(**params)
        if name == "always-nonzero":
            return always_nonzero(**params)
        if name == "partition-escape":
            sizes = params.pop("block_sizes")
            return partition_escape(make_partition(sizes), **params)
        if name == "shifted":
            return shift(goal_from_config(params["goal"]), int(params["t"]))
    except (TypeError, KeyError) as e:
        raise ConfigError(f"Bad parameters for goal '{name}': {e}") from e
    raise ConfigError(f"Unknown goal '{name}'.")
