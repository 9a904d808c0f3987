# app/strategies.py
"""
m-foresight strategies and the episode runner.

A strategy sees, at every stage, the depth-(m+1) fragment below its current
node together with everything it saw and did before; it never sees more of
the tree. `run_episode` alternates revelation and choice over a lazily
sampled tree (or over a pre-sampled one, for replay).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from app import seeding
from app.distmodel import DistributionFamily
from app.exceptions import ConfigError, IllegalActionError, StrategyError
from app.goals import Goal, prefix_status
from app.models.dto import Episode
from app.models.state import MdpState, RevealedState
from app.treespace import DEFAULT_NODE_BUDGET, LazyTree, TreeView

logger = logging.getLogger(__name__)

FLAG_NONZERO_AVAILABLE = "nonzero_available"
FLAG_FALLBACK = "fallback"
FLAG_CORNER = "corner"


@dataclass(frozen=True)
class Decision:
    action: int
    flags: frozenset[str] = frozenset()


Rule = Callable[[Sequence[RevealedState], Sequence[int], np.random.Generator], Decision]


@dataclass(frozen=True)
class Strategy:
    """
    A named decision rule with foresight m.

    The rule receives the revealed states so far (the last one is current),
    the actions already taken, and a private random stream.
    """
    name: str
    foresight: int
    rule: Rule = field(repr=False)

    def decide(self, history: Sequence[RevealedState], actions: Sequence[int],
               rng: Optional[np.random.Generator] = None) -> Decision:
        return self.rule(history, actions, rng)

    def choose(self, history: Sequence[RevealedState], actions: Sequence[int] = (),
               rng: Optional[np.random.Generator] = None) -> int:
        return self.decide(history, actions, rng).action


# --- 0-foresight strategies ---
def smallest_action_strategy() -> Strategy:
    return Strategy("smallest-action", 0, lambda hist, _acts, _rng: Decision(hist[-1].actions.min()))


def largest_action_strategy() -> Strategy:
    return Strategy("largest-action", 0, lambda hist, _acts, _rng: Decision(hist[-1].actions.max()))


def uniform_random_strategy() -> Strategy:
    """Uniform over the current action set, using the episode's private stream."""
    def rule(hist, _acts, rng):
        aset = hist[-1].actions
        return Decision(aset.element_at(int(rng.integers(len(aset)))))
    return Strategy("uniform-random", 0, rule)


# --- 1-foresight strategies ---
def _follow_up_counts(state: MdpState) -> tuple[list[int], list[int]]:
    actions = list(state.action_set())
    return actions, [len(state.nodes[(a,)]) for a in actions]


def one_step_maximizing_strategy() -> Strategy:
    """Largest next-stage action set; ties go to the smallest action."""
    def rule(hist, _acts, _rng):
        actions, counts = _follow_up_counts(hist[-1].state)
        best = max(counts)
        return Decision(actions[counts.index(best)])
    return Strategy("one-step-maximizing", 1, rule)


def example42_strategy() -> Strategy:
    """
    Smallest non-zero action whose follow-up set contains a non-zero action.
    Otherwise action 1 if available, else the smallest non-zero action
    (flagged as the corner case), else 0.
    """
    def rule(hist, _acts, _rng):
        state = hist[-1].state
        aset = state.action_set()
        for a in aset:
            if a != 0 and state.nodes[(a,)].nonzero_count() > 0:
                return Decision(a)
        if aset.nonzero_count() == 0:
            return Decision(0)
        if 1 in aset:
            return Decision(1, frozenset({FLAG_FALLBACK}))
        smallest = next(a for a in aset if a != 0)
        return Decision(smallest, frozenset({FLAG_FALLBACK, FLAG_CORNER}))
    return Strategy("example42", 1, rule)


def at_foresight(strategy: Strategy, m: int) -> Strategy:
    """
    The same rule run inside the m-foresight decision process. Rules only read
    the parts of the fragment their own foresight covers, so raising m never
    changes a decision.
    """
    if m < strategy.foresight:
        raise StrategyError(f"Strategy '{strategy.name}' needs foresight {strategy.foresight}, got {m}.")
    return replace(strategy, foresight=m)


BUILTIN_STRATEGIES: dict[str, Callable[[], Strategy]] = {
    "smallest-action": smallest_action_strategy,
    "largest-action": largest_action_strategy,
    "uniform-random": uniform_random_strategy,
    "one-step-maximizing": one_step_maximizing_strategy,
    "example42": example42_strategy,
}


def strategy_from_config(spec: Any) -> Strategy:
    name = spec.get("name") if isinstance(spec, dict) else spec
    factory = BUILTIN_STRATEGIES.get(name)
    if factory is None:
        raise ConfigError(f"Unknown strategy '{name}'. Known: {sorted(BUILTIN_STRATEGIES)}")
    return factory()


# --- Episodes ---
def run_episode(family: DistributionFamily, strategy: Strategy, goal: Goal, horizon: int, seed: int,
                t0: int = 0, view: Optional[TreeView] = None, k_max: Optional[int] = None,
                keep_states: bool = False, node_budget: int = DEFAULT_NODE_BUDGET) -> Episode:
    """
    Plays `horizon` stages: reveal the fragment at the current node, choose,
    move. With `view` given the episode is embedded in that tree instead of
    a fresh lazy one.

    Raises:
        IllegalActionError: if the strategy picks an unavailable action.
        NodeBudgetExceededError: if the revealed cone grows past the budget.
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}.")
    view = view if view is not None else LazyTree(family, t0, seed, node_budget)
    rng = seeding.generator(seed, "strategy")
    m = strategy.foresight
    history: list[RevealedState] = []
    path: list[int] = []
    digests, flags, available, sizes = [], [], [], []
    h: tuple[int, ...] = ()
    for k in range(horizon):
        state = view.fragment(h, m)
        revealed = RevealedState(t0 + k, state)
        history.append(revealed)
        decision = strategy.decide(history, tuple(path), rng)
        aset = state.action_set()
        if decision.action not in aset:
            raise IllegalActionError(
                f"Strategy '{strategy.name}' chose {decision.action} at stage {t0 + k}; available: {aset}.")
        stage_flags = set(decision.flags)
        if aset.nonzero_count() > 0:
            stage_flags.add(FLAG_NONZERO_AVAILABLE)
        digests.append(state.digest)
        flags.append(sorted(stage_flags))
        available.append(len(aset))
        sizes.append(state.size)
        path.append(int(decision.action))
        h = h + (int(decision.action),)
    status = prefix_status(goal, path, horizon, k_max)
    return Episode(
        seed=seed,
        strategy=strategy.name,
        path=tuple(path),
        digests=digests,
        flags=flags,
        available_counts=available,
        state_sizes=sizes,
        status=str(status),
        window=status.window,
        states=[r.state for r in history] if keep_states else [],
    )


def trace_lines(episode: Episode, t0: int = 0) -> str:
    """JSON lines: one object per stage with digest, action and flags."""
    rows = []
    for k, (digest, action, stage_flags) in enumerate(zip(episode.digests, episode.path, episode.flags)):
        rows.append(json.dumps({"stage": t0 + k, "state": digest, "action": action, "flags": stage_flags},
                               sort_keys=True))
    return "\n".join(rows) + "\n"
