# app/mdpcore.py
"""
The m-foresight decision process.

A state is the depth-(m+1) fragment below the Controller's node. Moving with
action a keeps the part of the fragment under a and draws one fresh action
set from p_{t+m+1} for every length-m continuation of a. This module provides
the kernel (sampling, exact probabilities, enumeration), exact window values
by backward induction on small instances, and the simulation checks of the
transition bounds used by the zero-one dichotomy.
"""
from __future__ import annotations

import itertools
import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional, Sequence

import networkx as nx
import numpy as np

from app import seeding
from app.actionset import ActionSet
from app.branching import MbpKernel, simulate_mbp
from app.distmodel import DiscreteLaw, DistributionFamily, dkw_epsilon
from app.exceptions import ConfigError, EnumerationBudgetError, IllegalActionError, StrategyError
from app.goals import Goal, always_nonzero
from app.models.dto import CheckResult
from app.models.state import MdpState, Path
from app.services.worker_service import run_indexed
from app.strategies import Strategy, at_foresight, one_step_maximizing_strategy, run_episode
from app.treespace import LazyTree

logger = logging.getLogger(__name__)

StatePredicate = Callable[[MdpState], bool]

DEFAULT_ACTION_CAP = 16
DEFAULT_FRONTIER_CAP = 100_000
DEFAULT_MIN_OCCUPANCY = 100
EXACT_TOLERANCE = 1e-10


# --- States and kernel ---
def actions(s: MdpState) -> ActionSet:
    return s.action_set()


def size(s: MdpState) -> int:
    return s.size


def _carried_nodes(s: MdpState, a: int) -> dict[Path, ActionSet]:
    """Fragment nodes under a, re-rooted at a."""
    return {path[1:]: aset for path, aset in s.nodes.items() if path and path[0] == a}


def _check_action(s: MdpState, a: int) -> None:
    if a not in s.action_set():
        raise IllegalActionError(f"Action {a} is not available in state {s!r}.")


def transition_sample(s: MdpState, a: int, t: int, family: DistributionFamily,
                      rng: np.random.Generator) -> MdpState:
    """Draws s' given (s, a) at stage t: one p_{t+m+1} set per continuation of a."""
    _check_action(s, a)
    nodes = _carried_nodes(s, a)
    dist = family.at(t + s.m + 1)
    leaves = list(s.continuations(a))
    for leaf, i in zip(leaves, dist.pick(rng.random(len(leaves))).tolist()):
        nodes[leaf] = dist.sets[i]
    return MdpState(s.m, nodes)


def transition_prob(s: MdpState, a: int, s_next: MdpState, t: int, family: DistributionFamily) -> float:
    """
    P(s' | s, a) at stage t: the product of p_{t+m+1} masses of the new leaf
    sets, or 0 when s' does not extend the carried part of s.
    """
    _check_action(s, a)
    if s_next.m != s.m:
        return 0.0
    carried = _carried_nodes(s, a)
    leaves = list(s.continuations(a))
    if len(s_next.nodes) != len(carried) + len(leaves):
        return 0.0
    for path, aset in carried.items():
        if s_next.nodes.get(path) != aset:
            return 0.0
    dist = family.at(t + s.m + 1)
    prob = 1.0
    for leaf in leaves:
        child = s_next.nodes.get(leaf)
        if child is None:
            return 0.0
        prob *= dist.mass_of(child)
        if prob == 0.0:
            return 0.0
    return prob


def enumerate_transitions(s: MdpState, a: int, t: int, family: DistributionFamily,
                          cap: int = DEFAULT_FRONTIER_CAP) -> Iterator[tuple[MdpState, float]]:
    """
    Every successor of (s, a) with its probability.

    Raises:
        EnumerationBudgetError: if the number of successors exceeds `cap`.
    """
    _check_action(s, a)
    carried = _carried_nodes(s, a)
    leaves = list(s.continuations(a))
    dist = family.at(t + s.m + 1)
    count = len(dist.sets) ** len(leaves)
    if count > cap:
        raise EnumerationBudgetError(
            f"{count} successors exceed the enumeration cap of {cap}.",
            {"stage": t, "action": a, "continuations": len(leaves), "successors": count})
    for combo in itertools.product(range(len(dist.sets)), repeat=len(leaves)):
        nodes = dict(carried)
        prob = 1.0
        for leaf, i in zip(leaves, combo):
            nodes[leaf] = dist.sets[i]
            prob *= dist.masses[i]
        yield MdpState(s.m, nodes), prob


def enumerate_states(family: DistributionFamily, t: int, m: int,
                     cap: int = DEFAULT_FRONTIER_CAP) -> list[tuple[MdpState, float]]:
    """The exact law phi_t: every depth-(m+1) fragment under mu_t with its probability."""
    partial: list[tuple[dict[Path, ActionSet], list[Path], float]] = []
    root = family.at(t)
    for aset, mass in zip(root.sets, root.masses):
        partial.append(({(): aset}, [()], mass))
    for depth in range(1, m + 1):
        dist = family.at(t + depth)
        grown = []
        for nodes, frontier, prob in partial:
            children = [p + (a,) for p in frontier for a in nodes[p]]
            if len(grown) + len(dist.sets) ** len(children) > cap:
                raise EnumerationBudgetError(
                    f"State enumeration at stage {t} exceeds the cap of {cap}.",
                    {"stage": t, "depth": depth, "partial_states": len(grown)})
            for combo in itertools.product(range(len(dist.sets)), repeat=len(children)):
                extended = dict(nodes)
                p = prob
                for child, i in zip(children, combo):
                    extended[child] = dist.sets[i]
                    p *= dist.masses[i]
                grown.append((extended, children, p))
        partial = grown
    return [(MdpState(m, nodes), prob) for nodes, _, prob in partial]


# --- Empirical state laws ---
@dataclass
class EmpiricalStateLaw:
    """Empirical law of states keyed by digest, with one representative per digest."""
    n: int
    counts: Counter = field(default_factory=Counter)
    states: dict[str, MdpState] = field(default_factory=dict, repr=False)

    def add(self, state: MdpState) -> None:
        self.counts[state.digest] += 1
        self.states.setdefault(state.digest, state)

    def frequency(self, digest: str) -> float:
        return self.counts.get(digest, 0) / self.n

    def mass(self, predicate: StatePredicate) -> float:
        hits = sum(c for d, c in self.counts.items() if predicate(self.states[d]))
        return hits / self.n

    def stderr(self, predicate: StatePredicate) -> float:
        p = self.mass(predicate)
        return math.sqrt(p * (1.0 - p) / self.n)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "frequencies": {d: c / self.n for d, c in sorted(self.counts.items())}}


def state_distribution_phi(family: DistributionFamily, t: int, m: int, n: int, seed: int,
                           workers: Optional[int] = None) -> EmpiricalStateLaw:
    """Empirical phi_t from n trees sampled to depth m+1 under mu_t."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}.")

    def draw(i: int) -> MdpState:
        return LazyTree(family, t, seeding.derive_seed(seed, "phi", t, i)).fragment((), m)

    law = EmpiricalStateLaw(n)
    for state in run_indexed(draw, n, workers):
        law.add(state)
    return law


_SIZE_PREDICATE = re.compile(r"^size\s*(<=|>=|==|<|>)\s*(\d+)$")


def state_predicate_from_config(spec: str) -> StatePredicate:
    """Named state sets: `all`, `none`, `root-nonzero`, `size<=N` (and the other comparisons)."""
    spec = spec.strip()
    if spec == "all":
        return lambda s: True
    if spec == "none":
        return lambda s: False
    if spec == "root-nonzero":
        return lambda s: s.action_set().nonzero_count() > 0
    match = _SIZE_PREDICATE.match(spec)
    if match:
        op, bound = match.group(1), int(match.group(2))
        compare = {
            "<=": lambda u: u <= bound, ">=": lambda u: u >= bound, "==": lambda u: u == bound,
            "<": lambda u: u < bound, ">": lambda u: u > bound,
        }[op]
        return lambda s: compare(s.size)
    raise ConfigError(f"Unknown state predicate '{spec}'.")


# --- Exact window values ---
class WindowValueSolver:
    """
    Optimal probability that every action in the window [start, end) is
    accepted by an `always` goal, from a given (stage, state), by backward
    induction over the reachable state graph.

    Values are memoised per (stage, digest), so repeated queries along a
    trajectory reuse earlier graphs.
    """

    def __init__(self, family: DistributionFamily, goal: Goal, m: int, end: int, window_start: int = 0,
                 action_cap: int = DEFAULT_ACTION_CAP, frontier_cap: int = DEFAULT_FRONTIER_CAP):
        if goal.kind != "always":
            raise ConfigError(f"Exact window values need an 'always' goal, got '{goal.kind}'.")
        self.family = family
        self.goal = goal
        self.m = m
        self.end = end
        self.start = goal.window_start(window_start)
        self.action_cap = action_cap
        self.frontier_cap = frontier_cap
        self._values: dict[tuple[int, str], float] = {}

    def accepts_at(self, stage: int, a: int) -> bool:
        return stage < self.start or self.goal.accepts(stage, a)

    def _build_graph(self, stage: int, state: MdpState) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        root = (stage, state.digest)
        graph.add_node(root, state=state)
        level = [root]
        for j in range(stage, self.end - 1):
            next_level = {}
            for node in level:
                if node in self._values:
                    continue
                s = graph.nodes[node]["state"]
                aset = s.action_set()
                if len(aset) > self.action_cap:
                    raise EnumerationBudgetError(
                        f"State at stage {j} has {len(aset)} actions, above the cap of {self.action_cap}.",
                        {"stage": j, "actions": len(aset), "states": graph.number_of_nodes()})
                for a in aset:
                    if not self.accepts_at(j, a):
                        continue
                    for succ, prob in enumerate_transitions(s, a, j, self.family, self.frontier_cap):
                        key = (j + 1, succ.digest)
                        if key not in graph:
                            graph.add_node(key, state=succ)
                            next_level[key] = None
                        graph.add_edge(node, key, key=a, prob=prob)
                if graph.number_of_nodes() > self.frontier_cap:
                    raise EnumerationBudgetError(
                        f"Reachable state space exceeds the frontier cap of {self.frontier_cap}.",
                        {"stage": j, "states": graph.number_of_nodes(), "levels_done": j - stage})
            level = list(next_level)
        return graph

    def value(self, stage: int, state: MdpState) -> float:
        if stage >= self.end:
            return 1.0
        key = (stage, state.digest)
        cached = self._values.get(key)
        if cached is not None:
            return cached
        graph = self._build_graph(stage, state)
        for node in sorted(graph.nodes, key=lambda n: -n[0]):
            if node in self._values:
                continue
            j, _ = node
            s = graph.nodes[node]["state"]
            if j == self.end - 1:
                best = 1.0 if any(self.accepts_at(j, a) for a in s.action_set()) else 0.0
            else:
                totals: dict[int, float] = defaultdict(float)
                for _, succ, a, data in graph.out_edges(node, keys=True, data=True):
                    totals[a] += data["prob"] * self._values[succ]
                best = max(totals.values(), default=0.0)
            self._values[node] = min(1.0, best)
        logger.debug(f"Window value graph from stage {stage}: {graph.number_of_nodes()} states.")
        return self._values[key]

    def initial_value(self, stage: int) -> float:
        """Expected value under phi_stage, by exact enumeration."""
        return math.fsum(p * self.value(stage, s) for s, p in enumerate_states(self.family, stage, self.m))


def finite_horizon_value(family: DistributionFamily, goal: Goal, m: int, t: int, s: MdpState, horizon: int,
                         window_start: int = 0, action_cap: int = DEFAULT_ACTION_CAP,
                         frontier_cap: int = DEFAULT_FRONTIER_CAP) -> float:
    """
    Exact optimal success probability of the window [max(t, start), t+H)
    from state s at stage t. H = 0 gives 1.

    Raises:
        EnumerationBudgetError: when the action or frontier cap is exceeded.
    """
    if horizon == 0:
        return 1.0
    solver = WindowValueSolver(family, goal, m, t + horizon, window_start, action_cap, frontier_cap)
    return solver.value(t, s)


# --- Binning ---
def _bins(digests: Sequence[str], sizes: Sequence[int], min_occupancy: int) -> tuple[dict[str, list[int]], dict[str, int]]:
    """Indices grouped by digest when occupied enough, else pooled by state size."""
    by_digest: dict[str, list[int]] = defaultdict(list)
    for i, d in enumerate(digests):
        by_digest[d].append(i)
    bins: dict[str, list[int]] = {}
    pooled: dict[str, list[int]] = defaultdict(list)
    for d, idx in by_digest.items():
        if len(idx) >= min_occupancy:
            bins[f"state:{d}"] = idx
        else:
            pooled[f"u={sizes[idx[0]]}"].extend(idx)
    excluded = {}
    for key, idx in pooled.items():
        if len(idx) >= min_occupancy:
            bins[key] = sorted(idx)
        else:
            excluded[key] = len(idx)
    return bins, excluded


def _trajectory(family: DistributionFamily, strategy: Strategy, goal: Optional[Goal], m: int,
                horizon: int, seed: int, t0: int = 0) -> list[MdpState]:
    episode = run_episode(family, at_foresight(strategy, m), goal or always_nonzero(), horizon, seed,
                          t0=t0, keep_states=True)
    return episode.states


def _collect(family: DistributionFamily, strategy: Strategy, m: int, stages: Sequence[int], n: int,
             seed: int, purpose: str, workers: Optional[int]) -> list[list[MdpState]]:
    horizon = max(stages) + 1

    def one(i: int) -> list[MdpState]:
        states = _trajectory(family, strategy, None, m, horizon, seeding.derive_seed(seed, purpose, i))
        return [states[k] for k in stages]

    return run_indexed(one, n, workers)


# --- Transition checks ---
def check_step1(family: DistributionFamily, m: int, t: int, Q: StatePredicate, strategy: Strategy,
                n: int, seed: int, z: float = 3.0, min_occupancy: int = DEFAULT_MIN_OCCUPANCY,
                workers: Optional[int] = None) -> CheckResult:
    """
    Under a 0-foresight strategy, P(s_{t+m+1} in Q | s_t) equals phi_{t+m+1}(Q)
    in every occupied bin of s_t, within z pooled standard errors.
    """
    if strategy.foresight != 0:
        raise StrategyError(f"check_step1 needs a 0-foresight strategy, got '{strategy.name}'.")
    later = t + m + 1
    rows = _collect(family, strategy, m, [t, later], n, seed, "step1", workers)
    phi = state_distribution_phi(family, later, m, n, seeding.derive_seed(seed, "step1-phi"), workers)
    rhs, rhs_se = phi.mass(Q), phi.stderr(Q)
    bins, excluded = _bins([r[0].digest for r in rows], [r[0].size for r in rows], min_occupancy)
    report = []
    passed = True
    for key, idx in sorted(bins.items()):
        hits = sum(1 for i in idx if Q(rows[i][1]))
        lhs = hits / len(idx)
        se = math.sqrt(lhs * (1 - lhs) / len(idx))
        ok = abs(lhs - rhs) <= z * math.sqrt(se ** 2 + rhs_se ** 2) + EXACT_TOLERANCE
        passed &= ok
        report.append({"bin": key, "n": len(idx), "lhs": lhs, "lhs_se": se, "passed": ok})
    return CheckResult("step1", passed, {
        "stage": t, "m": m, "rhs": rhs, "rhs_se": rhs_se, "bins": report, "excluded": excluded, "n": n, "seed": seed,
    })


def check_step4(family: DistributionFamily, m: int, t: int, Q: StatePredicate, strategy: Strategy,
                n: int, seed: int, z: float = 3.0, min_occupancy: int = DEFAULT_MIN_OCCUPANCY,
                workers: Optional[int] = None) -> CheckResult:
    """For any m-foresight strategy: P(s_{t+m+1} in Q | s_t) >= phi_{t+m+1}(Q)^{u(s_t)} per bin."""
    later = t + m + 1
    rows = _collect(family, strategy, m, [t, later], n, seed, "step4", workers)
    phi = state_distribution_phi(family, later, m, n, seeding.derive_seed(seed, "step4-phi"), workers)
    rhs, rhs_se = phi.mass(Q), phi.stderr(Q)
    bins, excluded = _bins([r[0].digest for r in rows], [r[0].size for r in rows], min_occupancy)
    report = []
    passed = True
    for key, idx in sorted(bins.items()):
        u = rows[idx[0]][0].size
        hits = sum(1 for i in idx if Q(rows[i][1]))
        lhs = hits / len(idx)
        se = math.sqrt(lhs * (1 - lhs) / len(idx))
        bound = rhs ** u
        bound_se = u * rhs ** (u - 1) * rhs_se if u > 0 else 0.0
        ok = lhs >= bound - z * math.sqrt(se ** 2 + bound_se ** 2) - EXACT_TOLERANCE
        passed &= ok
        report.append({"bin": key, "n": len(idx), "size": u, "lhs": lhs, "lower_bound": bound, "passed": ok})
    return CheckResult("step4", passed, {
        "stage": t, "m": m, "strategy": strategy.name, "phi_Q": rhs, "phi_Q_se": rhs_se,
        "bins": report, "excluded": excluded, "n": n, "seed": seed,
    })


def good_state_mass(solver: WindowValueSolver, stage: int, eps: float) -> float:
    """z_stage: phi-mass of states whose window value is at least eps (exact)."""
    return math.fsum(p for s, p in enumerate_states(solver.family, stage, solver.m) if solver.value(stage, s) >= eps)


def check_step5_bound(family: DistributionFamily, goal: Goal, m: int, t: int, horizon: int, eps: float = 0.5,
                      window_start: int = 0) -> CheckResult:
    """
    On an enumerable instance: V_t(s) <= 1 - (1 - eps) (1 - z)^{u(s)} for
    every state s, with z the good-state mass at stage t+m+1. The form
    1 - eps (1 - z)^{u(s)} is evaluated and reported alongside.
    """
    solver = WindowValueSolver(family, goal, m, t + horizon, window_start)
    z_mass = good_state_mass(solver, t + m + 1, eps)
    rows = []
    derived_ok = stated_ok = True
    for s, p in enumerate_states(family, t, m):
        v = solver.value(t, s)
        derived = 1.0 - (1.0 - eps) * (1.0 - z_mass) ** s.size
        stated = 1.0 - eps * (1.0 - z_mass) ** s.size
        derived_ok &= v <= derived + EXACT_TOLERANCE
        stated_ok &= v <= stated + EXACT_TOLERANCE
        rows.append({"state": s.digest, "probability": p, "size": s.size, "value": v,
                     "derived_bound": derived, "stated_bound": stated})
    return CheckResult("step5", derived_ok, {
        "stage": t, "m": m, "horizon": horizon, "eps": eps, "good_state_mass": z_mass,
        "derived_form_holds": derived_ok, "stated_form_holds": stated_ok, "states": rows,
    })


def _cdf_at(sorted_samples: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_samples, points, side="right") / len(sorted_samples)


def check_step6_dominance(family: DistributionFamily, m: int, q: DiscreteLaw, strategy: Strategy, T: int,
                          n: int, seed: int, t: int = 0, alpha: float = 0.01,
                          min_occupancy: int = DEFAULT_MIN_OCCUPANCY, workers: Optional[int] = None) -> CheckResult:
    """
    Two dominance tests against the maximal branching process of q.

    Conditional: per bin of s_t, the empirical CDF of u(s_{t+m}) stays above
    F_q(n)^{u(s_t)} minus the DKW band. Unconditional: X_k = u(s_{km}) for
    k < T is compared with Y_k of the process coupled at Y_0 = u(s_0), one
    path per episode, so indices match for every m.
    """
    stages = sorted(set([t, t + m] + [k * m for k in range(T)]))
    rows = _collect(family, strategy, m, stages, n, seed, "step6", workers)
    pos = {stage: i for i, stage in enumerate(stages)}
    kernel = MbpKernel(q)

    bins, excluded = _bins([r[pos[t]].digest for r in rows], [r[pos[t]].size for r in rows], min_occupancy)
    conditional = []
    passed = True
    for key, idx in sorted(bins.items()):
        u = rows[idx[0]][pos[t]].size
        later = np.sort(np.array([rows[i][pos[t + m]].size for i in idx]))
        points = np.union1d(np.unique(later), np.asarray(q.values, dtype=np.int64))
        points = points[points <= later[-1]]
        empirical = _cdf_at(later, points)
        bound = np.array([kernel.step_cdf(p, u) for p in points])
        band = dkw_epsilon(len(idx), alpha)
        ok = bool(np.all(empirical >= bound - band - EXACT_TOLERANCE))
        passed &= ok
        conditional.append({"bin": key, "n": len(idx), "size": u, "dkw_band": band,
                            "worst_gap": float(np.max(bound - empirical)), "passed": ok})

    unconditional = []
    starts = [r[pos[0]].size for r in rows]
    mbp_paths = np.array([simulate_mbp(kernel, max(T - 1, 1), seeding.generator(seed, "step6-mbp", i), y0=y0)
                          for i, y0 in enumerate(starts)])
    band = 2 * dkw_epsilon(n, alpha)
    for k in range(T):
        sizes = np.sort(np.array([r[pos[k * m]].size for r in rows]))
        ys = np.sort(mbp_paths[:, k])
        points = np.union1d(np.unique(sizes), np.unique(ys))
        gap = float(np.max(_cdf_at(ys, points) - _cdf_at(sizes, points)))
        ok = gap <= band + EXACT_TOLERANCE
        passed &= ok
        unconditional.append({"index": k, "stage": k * m, "mbp_index": k, "worst_gap": gap, "band": band,
                              "passed": ok})

    return CheckResult("step6", passed, {
        "m": m, "stage": t, "strategy": strategy.name, "alpha": alpha, "n": n, "seed": seed,
        "conditional": conditional, "excluded": excluded, "unconditional": unconditional,
        "mbp_start": "u(s_0)",
    })


def check_value_supermartingale(family: DistributionFamily, goal: Goal, m: int, strategy: Strategy, horizon: int,
                                n: int, seed: int, z: float = 3.0, t0: int = 0, window_start: int = 0,
                                min_occupancy: int = DEFAULT_MIN_OCCUPANCY) -> CheckResult:
    """
    Along simulated trajectories, W_t = V_t(s_t) while the window is still
    intact (0 after a rejected action) satisfies E[W_{t+1} | s_t] <= W_t + z SE
    in every occupied bin.
    """
    end = t0 + horizon
    solver = WindowValueSolver(family, goal, m, end, window_start)
    strategy = at_foresight(strategy, m)
    per_stage: dict[int, dict[str, list[tuple[float, float]]]] = defaultdict(lambda: defaultdict(list))
    for i in range(n):
        episode = run_episode(family, strategy, goal, horizon, seeding.derive_seed(seed, "martingale", i),
                              t0=t0, keep_states=True)
        alive = True
        w = []
        for k, (state, a) in enumerate(zip(episode.states, episode.path)):
            stage = t0 + k
            w.append(solver.value(stage, state) if alive else 0.0)
            alive = alive and solver.accepts_at(stage, a)
        w.append(1.0 if alive else 0.0)
        for k in range(horizon):
            cell = episode.digests[k] if w[k] > 0 else "dead"
            per_stage[k][cell].append((w[k], w[k + 1]))
    rows = []
    passed = True
    for k in sorted(per_stage):
        for cell, pairs in sorted(per_stage[k].items()):
            if len(pairs) < min_occupancy:
                continue
            current = pairs[0][0]
            nxt = np.array([p[1] for p in pairs])
            se = float(nxt.std(ddof=1) / math.sqrt(len(nxt))) if len(nxt) > 1 else 0.0
            ok = float(nxt.mean()) <= current + z * se + EXACT_TOLERANCE
            passed &= ok
            rows.append({"stage": t0 + k, "cell": cell, "n": len(pairs), "value": current,
                         "next_mean": float(nxt.mean()), "se": se, "passed": ok})
    return CheckResult("value-supermartingale", passed, {"m": m, "horizon": horizon, "cells": rows, "n": n})


def check_size_matches_actions(family: DistributionFamily, horizon: int, n: int, seed: int,
                               t0: int = 0) -> CheckResult:
    """Under one-step maximizing play, #A at stage k+1 equals u(s_k)."""
    strategy = one_step_maximizing_strategy()
    mismatches = 0
    for i in range(n):
        episode = run_episode(family, strategy, always_nonzero(), horizon,
                              seeding.derive_seed(seed, "size-check", i), t0=t0)
        for k in range(horizon - 1):
            if episode.available_counts[k + 1] != episode.state_sizes[k]:
                mismatches += 1
    return CheckResult("size-matches-actions", mismatches == 0, {"episodes": n, "horizon": horizon,
                                                                "mismatches": mismatches})
