# app/estimators.py
"""
Monte-Carlo and exact estimators built on episodes, lazy trees and branching laws.

Strategy estimates and omniscient brackets share per-index seeds
(`derive_seed(seed, "episode", i)`), so the i-th episode of every strategy
runs inside the i-th omniscient tree. Orderings between them therefore hold
path by path and not only in distribution.

Stages are relative to the tree's origin: pass `shift(goal, t0)` together
with `t0` when starting later than stage 0.
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from typing import Optional, Sequence

from app import seeding
from app.actionset import ActionSet
from app.branching import accepted_offspring, extinction_iteration
from app.distmodel import (
    DistributionFamily,
    cardinality_law,
    log_product,
    pgf_derivative,
    pgf_eval,
)
from app.exceptions import ConfigError, NodeBudgetExceededError
from app.families import Example43Params, example42, example43
from app.goals import Goal, always_nonzero, make_partition, partition_escape, prefix_status, shift
from app.models.dto import CheckResult, Estimate, ShiftValueSequence
from app.services.worker_service import run_indexed
from app.strategies import (
    FLAG_NONZERO_AVAILABLE,
    Strategy,
    example42_strategy,
    one_step_maximizing_strategy,
    run_episode,
)
from app.treespace import DEFAULT_NODE_BUDGET, LazyTree, TruncatedTree, cylinder_frequency, prefix_probability

logger = logging.getLogger(__name__)

DEFAULT_Z = 3.0
SKIP_RATE_LIMIT = 0.01
EXACT_FLOOR = 1e-9
# Children of smaller sets are drawn in one vectorised call.
EXPAND_LIMIT = 4096


# --- Strategy success ---
def estimate_strategy_success(family: DistributionFamily, strategy: Strategy, goal: Goal, horizon: int,
                              n: int, seed: int, window: int = 0, z: float = DEFAULT_Z,
                              workers: Optional[int] = None, t0: int = 0,
                              node_budget: int = DEFAULT_NODE_BUDGET) -> Estimate:
    """
    Binomial estimate of P(the window surrogate of `goal` holds on [k, T))
    under `strategy`, with k = goal.window_start(window).

    Raises:
        NodeBudgetExceededError: if an episode reveals too much of its tree.
    """
    start = goal.window_start(window)

    def one(i: int) -> bool:
        episode = run_episode(family, strategy, goal, horizon, seeding.derive_seed(seed, "episode", i),
                              t0=t0, node_budget=node_budget)
        return goal.holds_on(episode.path, start, horizon)

    successes = sum(run_indexed(one, n, workers))
    label = f"{strategy.name}|{goal.name}|T={horizon}|k={start}"
    logger.info(f"Strategy estimate {label}: {successes}/{n}")
    return Estimate.binomial(successes, n, z, seed, label)


# --- Omniscient search ---
def has_good_branch(view: LazyTree, goal: Goal, end: int, start: int, h: tuple[int, ...] = ()) -> bool:
    """
    Depth-first search for a branch below h of total length `end` whose
    actions at stages in [start, end) are all accepted.
    """
    depth = len(h)
    if depth >= end:
        return True
    aset = view.action_set(h)
    constrained = depth >= start
    if constrained and goal.count_accepted(depth, aset) == 0:
        return False
    if depth + 1 == end:
        return True
    if len(aset) <= EXPAND_LIMIT:
        view.expand(h)
    candidates = goal.accepted_actions(depth, aset) if constrained else iter(aset)
    return any(has_good_branch(view, goal, end, start, h + (a,)) for a in candidates)


def _search(family: DistributionFamily, goal: Goal, horizon: int, start: int, seed: int, t0: int,
            node_budget: int) -> Optional[bool]:
    """None when the tree outgrows the node budget."""
    view = LazyTree(family, t0, seed, node_budget)
    try:
        return has_good_branch(view, goal, horizon, start)
    except NodeBudgetExceededError:
        return None


def estimate_omniscient(family: DistributionFamily, goal: Goal, horizon: int, n: int, seed: int,
                        window: int = 0, z: float = DEFAULT_Z, workers: Optional[int] = None, t0: int = 0,
                        node_budget: int = DEFAULT_NODE_BUDGET,
                        skip_rate_limit: float = SKIP_RATE_LIMIT) -> Estimate:
    """
    Share of sampled trees holding a depth-`horizon` branch inside the window
    surrogate: an upper bracket for every strategy on the same seeds.

    Trees exceeding the node budget are skipped and counted; a skip rate
    above `skip_rate_limit` marks the estimate inconclusive.
    """
    start = goal.window_start(window)
    results = run_indexed(
        lambda i: _search(family, goal, horizon, start, seeding.derive_seed(seed, "episode", i), t0, node_budget),
        n, workers)
    skipped = sum(1 for r in results if r is None)
    successes = sum(1 for r in results if r)
    label = f"omniscient|{goal.name}|T={horizon}|k={start}"
    estimate = Estimate.binomial(successes, n - skipped, z, seed, label, skipped)
    if estimate.skip_rate > skip_rate_limit:
        estimate.inconclusive = True
        estimate.notes.append(f"skip rate {estimate.skip_rate:.4f} exceeds {skip_rate_limit}")
        logger.warning(f"Omniscient search {label}: {skipped} of {n} trees skipped (node budget).")
    logger.info(f"Omniscient estimate {label}: {successes}/{n - skipped}")
    return estimate


# --- Shifted values ---
def exact_shift_values(family: DistributionFamily, goal: Goal, start: int, end: int, t_max: int) -> list[float]:
    """
    s_t for t = 0..t_max: the probability that no branch from stage t to
    `end` is accepted on [max(start, t), end).

    From `start` on this is the extinction probability of the accepted-action
    process; before it, s_t = g_t(s_{t+1}) with g_t the PGF of #p_t.
    """
    accepted = accepted_offspring(family, goal)
    values: dict[int, float] = {}
    for t in range(max(start, t_max), -1, -1):
        if t >= end:
            values[t] = 0.0
        elif t >= start:
            values[t] = extinction_iteration(accepted, t, end - t)
        else:
            values[t] = min(1.0, pgf_eval(cardinality_law(family.at(t)), values[t + 1]))
    return [values[t] for t in range(t_max + 1)]


def shift_value_sequence(family: DistributionFamily, goal: Goal, t_max: int, end: int, n: int, seed: int,
                         window: int = 0, z: float = DEFAULT_Z, workers: Optional[int] = None,
                         node_budget: int = DEFAULT_NODE_BUDGET) -> ShiftValueSequence:
    """
    Estimates s_t by omniscient search on the t-shifted problem (family
    advanced t stages, goal shifted by t) and checks, for each t < t_max,

    - s_t = g_t(s_{t+1}) before the window start and s_t = f_t(s_{t+1})
      inside it, f_t being the accepted-action PGF;
    - agreement with the exact values;
    - s_t <= s_{t+1} wherever stage t is unconstrained.

    Tolerances are max(1e-9, z * combined SE).
    """
    start = goal.window_start(window)
    if t_max >= end:
        raise ConfigError(f"t_max ({t_max}) must be below the horizon end ({end}).")
    exact = exact_shift_values(family, goal, start, end, t_max)
    accepted = accepted_offspring(family, goal)
    values, stderrs = [], []
    for t in range(t_max + 1):
        estimate = estimate_omniscient(family.advanced(t), shift(goal, t), end - t, n,
                                       seeding.derive_seed(seed, "shift", t), window=max(window - t, 0), z=z,
                                       workers=workers, node_budget=node_budget)
        values.append(1.0 - estimate.point)
        stderrs.append(estimate.stderr)

    residuals, recursion_ok = [], []
    monotone_ok = True
    for t in range(t_max):
        law = accepted.at(t) if t >= start else cardinality_law(family.at(t))
        predicted = pgf_eval(law, values[t + 1])
        slope = pgf_derivative(law, values[t + 1])
        tol = max(EXACT_FLOOR, z * math.hypot(stderrs[t], slope * stderrs[t + 1]))
        residuals.append(predicted - values[t])
        recursion_ok.append(abs(predicted - values[t]) <= tol)
        if t + 1 <= start:
            monotone_ok &= values[t] <= values[t + 1] + max(EXACT_FLOOR, z * math.hypot(stderrs[t], stderrs[t + 1]))
    exact_ok = [abs(v - x) <= max(EXACT_FLOOR, z * se) for v, x, se in zip(values, exact, stderrs)]
    return ShiftValueSequence(goal.name, values, stderrs, exact, residuals, recursion_ok, exact_ok, monotone_ok)


def _generation_count(view: LazyTree, t: int) -> int:
    """#omega_t of a lazily sampled tree."""
    if t == 0:
        return 1
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(t - 1):
        nxt = []
        for h in frontier:
            aset, _ = view.expand(h)
            nxt.extend(h + (a,) for a in aset)
        frontier = nxt
    return sum(len(view.action_set(h)) for h in frontier)


def conditional_power_identity_check(family: DistributionFamily, goal: Goal, t: int, end: int, n: int, seed: int,
                                     window: int = 0, z: float = DEFAULT_Z, min_occupancy: int = 100,
                                     workers: Optional[int] = None,
                                     node_budget: int = DEFAULT_NODE_BUDGET) -> CheckResult:
    """
    P(no good branch | #omega_t = N) = s_t^N, tested per bin of N against the
    exact s_t. Bins with fewer than `min_occupancy` trees are excluded and
    reported.
    """
    start = goal.window_start(window)
    if t > start:
        raise ConfigError(f"Stage {t} lies inside the window starting at {start}; the identity needs t <= {start}.")
    s_t = exact_shift_values(family, goal, start, end, t)[t]

    def one(i: int) -> Optional[tuple[int, bool]]:
        view = LazyTree(family, 0, seeding.derive_seed(seed, "power", i), node_budget)
        try:
            return _generation_count(view, t), not has_good_branch(view, goal, end, start)
        except NodeBudgetExceededError:
            return None

    results = run_indexed(one, n, workers)
    skipped = sum(1 for r in results if r is None)
    by_size: dict[int, list[bool]] = defaultdict(list)
    for r in results:
        if r is not None:
            by_size[r[0]].append(r[1])

    bins, excluded = [], {}
    passed = True
    for size, failures in sorted(by_size.items()):
        if len(failures) < min_occupancy:
            excluded[str(size)] = len(failures)
            continue
        expected = s_t ** size
        freq = sum(failures) / len(failures)
        se = math.sqrt(expected * (1.0 - expected) / len(failures))
        ok = abs(freq - expected) <= z * se + 1e-10
        passed &= ok
        bins.append({"size": size, "n": len(failures), "frequency": freq, "expected": expected,
                     "se": se, "passed": ok})
    inconclusive = not bins or skipped / max(n, 1) > SKIP_RATE_LIMIT
    logger.info(f"Power identity at t={t}: {len(bins)} bins, {len(excluded)} excluded, passed={passed}")
    return CheckResult("conditional-power-identity", passed and bool(bins), {
        "stage": t, "end": end, "window_start": start, "s_t": s_t, "bins": bins, "excluded": excluded,
        "skipped": skipped, "n": n, "seed": seed,
    }, inconclusive=inconclusive)


# --- Complementarity and orderings ---
def complementarity_check(family: DistributionFamily, strategy: Strategy, goal: Goal, horizon: int, n: int,
                          seed: int, window: int = 0, k_max: Optional[int] = None, z: float = DEFAULT_Z,
                          workers: Optional[int] = None) -> CheckResult:
    """
    Every episode is counted exactly once in the G-window or the
    complementary window: for `always` goals by the status on [k, T), for
    `eventually_always` goals by HoldsOnWindow(k <= k_max) versus
    ViolatedAtAllWindows.
    """
    start = goal.window_start(window)

    def one(i: int) -> str:
        episode = run_episode(family, strategy, goal, horizon, seeding.derive_seed(seed, "episode", i))
        if goal.kind == "always":
            return "holds" if goal.holds_on(episode.path, start, horizon) else "violated"
        return prefix_status(goal, episode.path, horizon, k_max).kind

    kinds = run_indexed(one, n, workers)
    holds = kinds.count("holds")
    violated = kinds.count("violated")
    undetermined = n - holds - violated
    goal_estimate = Estimate.binomial(holds, n, z, seed, f"{strategy.name}|{goal.name}")
    complement_estimate = Estimate.binomial(violated, n, z, seed, f"{strategy.name}|not {goal.name}")
    return CheckResult("complementarity", undetermined == 0, {
        "strategy": strategy.name, "goal": goal.name, "horizon": horizon, "holds": holds, "violated": violated,
        "undetermined": undetermined, "goal_estimate": goal_estimate, "complement_estimate": complement_estimate,
        "degenerate": goal_estimate.point in (0.0, 1.0),
    })


def value_ordering(family: DistributionFamily, goal: Goal, roster: Sequence[Strategy], horizon: int, n: int,
                   seed: int, window: int = 0, z: float = DEFAULT_Z, workers: Optional[int] = None,
                   node_budget: int = DEFAULT_NODE_BUDGET) -> CheckResult:
    """
    Lower evidence for v^m (the best roster member with foresight at most m)
    must be nondecreasing in m and stay below the omniscient bracket, within
    z combined standard errors.

    Raises:
        ConfigError: if the roster is empty.
    """
    if not roster:
        raise ConfigError("Value ordering needs at least one strategy in the roster.")
    estimates = {s.name: estimate_strategy_success(family, s, goal, horizon, n, seed, window, z, workers,
                                                   node_budget=node_budget) for s in roster}
    omniscient = estimate_omniscient(family, goal, horizon, n, seed, window, z, workers, node_budget=node_budget)
    levels = []
    for m in range(max(s.foresight for s in roster) + 1):
        members = [s for s in roster if s.foresight <= m]
        if members:
            best = max(members, key=lambda s: estimates[s.name].point)
            levels.append({"m": m, "strategy": best.name, "estimate": estimates[best.name]})

    chain = [lv["estimate"] for lv in levels] + [omniscient]
    steps = []
    passed = True
    for lower, upper in zip(chain, chain[1:]):
        ok = lower.point <= upper.point + z * math.hypot(lower.stderr, upper.stderr) + 1e-12
        passed &= ok
        steps.append({"lower": lower.label, "upper": upper.label, "passed": ok})
    return CheckResult("value-ordering", passed, {
        "goal": goal.name, "horizon": horizon, "levels": levels, "omniscient": omniscient, "steps": steps,
        "estimates": estimates,
    }, label="lower evidence", inconclusive=omniscient.inconclusive)


def horizon_ladder(family: DistributionFamily, strategy: Strategy, goal: Goal, horizons: Sequence[int], n: int,
                   seed: int, window: int = 0, z: float = DEFAULT_Z, workers: Optional[int] = None) -> CheckResult:
    """Estimates along increasing horizons; an isotonic violation beyond z SE fails the check."""
    ladder = sorted(set(horizons))
    estimates = [estimate_strategy_success(family, strategy, goal, T, n, seed, window, z, workers) for T in ladder]
    violations = []
    for i, shorter in enumerate(estimates):
        for longer, T in zip(estimates[i + 1:], ladder[i + 1:]):
            if longer.point > shorter.point + z * math.hypot(shorter.stderr, longer.stderr) + 1e-12:
                violations.append({"shorter": ladder[i], "longer": T})
    return CheckResult("horizon-ladder", not violations, {
        "strategy": strategy.name, "goal": goal.name, "horizons": ladder, "estimates": estimates,
        "violations": violations,
    })


# --- Example 4.2 ---
def example42_claim_factors(horizon: int) -> list[float]:
    """1 - (1 - 2^-(t+1))^(t 2^t) for t = 1..horizon-1."""
    return [1.0 - (1.0 - 2.0 ** -(t + 1)) ** (t * 2 ** t) for t in range(1, horizon)]


def example42_claim_products(n: int, seed: int, horizon: int = 7, z: float = DEFAULT_Z,
                             workers: Optional[int] = None) -> CheckResult:
    """
    Under the Example 4.2 strategy, P(a non-zero action is available at
    every stage 1..T-1 | one is available at stage 0) against the product of
    the per-stage factors.
    """
    family, strategy, goal = example42(), example42_strategy(), always_nonzero(from_stage=1)

    def one(i: int) -> Optional[bool]:
        episode = run_episode(family, strategy, goal, horizon, seeding.derive_seed(seed, "episode", i))
        if not episode.has_flag(0, FLAG_NONZERO_AVAILABLE):
            return None
        return all(episode.has_flag(k, FLAG_NONZERO_AVAILABLE) for k in range(1, horizon))

    results = run_indexed(one, n, workers)
    conditioned = [r for r in results if r is not None]
    estimate = Estimate.binomial(sum(conditioned), len(conditioned), z, seed, "example42|claim-product")
    factors = example42_claim_factors(horizon)
    log_value = log_product(factors)
    exact = math.exp(log_value)
    direct = math.prod(factors)
    relative = abs(exact - direct) / direct
    first_factor_ok = factors[0] == 0.4375 if factors else True
    passed = estimate.agrees_with(exact) and first_factor_ok and relative <= 1e-12
    return CheckResult("example42-claim-product", passed, {
        "horizon": horizon, "factors": factors, "product": exact, "log_product": log_value,
        "relative_error": relative, "first_factor": factors[0] if factors else None,
        "stage0_rate": len(conditioned) / n, "estimate": estimate,
    })


def delta_tree(depth: int) -> TruncatedTree:
    """The single-branch tree whose every action set is {0}."""
    zero = ActionSet.singleton(0)
    return TruncatedTree(depth, 0, {(0,) * k: zero for k in range(depth)})


def example42_delta_mass(n: int, seed: int, depth: int = 8, z: float = DEFAULT_Z) -> CheckResult:
    """Cylinder mass of the all-{0} tree: exact log-space product against lazy sampling."""
    family = example42()
    delta = delta_tree(depth)
    exact = math.exp(prefix_probability(delta, depth, family))
    reference = math.exp(log_product(1.0 - 2.0 ** -(k + 1) for k in range(depth)))
    hits = cylinder_frequency(family, 0, delta, depth, n, seeding.derive_seed(seed, "delta"))
    estimate = Estimate.binomial(hits, n, z, seed, f"example42|delta-cylinder|T={depth}")
    exact_ok = abs(exact - reference) <= 1e-12
    return CheckResult("example42-delta-mass", exact_ok and estimate.agrees_with(exact), {
        "depth": depth, "prefix_probability": exact, "product": reference, "exact_ok": exact_ok,
        "estimate": estimate,
    })


# --- Example 4.3 ---
def example43_theta_bounds(params: Example43Params, n: int, seed: int, t_max: int = 3, z: float = DEFAULT_Z,
                           workers: Optional[int] = None) -> CheckResult:
    """
    Under one-step maximizing play, the share of episodes with Y_t <= m_t
    among those with Y_s > m_s for every s < t stays below r_t^{m_t}.
    """
    family = example43(params)
    goal = partition_escape(make_partition(params.block_sizes))
    horizon = t_max + 1

    def one(i: int) -> list[int]:
        return run_episode(family, one_step_maximizing_strategy(), goal, horizon,
                           seeding.derive_seed(seed, "episode", i)).available_counts

    counts = run_indexed(one, n, workers)
    rows = []
    passed = True
    for t in range(horizon):
        m_t = params.block_sizes[t]
        pool = [c for c in counts if all(c[s] > params.block_sizes[s] for s in range(t))]
        hits = sum(1 for c in pool if c[t] <= m_t)
        estimate = Estimate.binomial(hits, len(pool), z, seed, f"theta_{t}")
        bound = params.r[t] ** m_t
        ok = bool(pool) and estimate.point <= bound + z * estimate.stderr + 1e-12
        passed &= ok
        rows.append({"stage": t, "conditioned": len(pool), "frequency": estimate.point, "se": estimate.stderr,
                     "bound": bound, "passed": ok})
    success = sum(1 for c in counts if all(c[t] > params.block_sizes[t] for t in range(horizon)))
    lower = math.exp(log_product(1.0 - params.r[t] ** params.block_sizes[t] for t in range(horizon)))
    return CheckResult("example43-theta", passed, {
        "block_sizes": list(params.block_sizes), "r": list(params.r), "stages": rows,
        "success_estimate": Estimate.binomial(success, n, z, seed, "theta-complement"), "product_lower_bound": lower,
    })


def _lambda_depth(view: LazyTree, limits: Sequence[int], t_max: int) -> int:
    """Number of consecutive generations 0, 1, ... whose sets all lie in blocks M_0..M_t."""
    frontier: list[tuple[int, ...]] = [()]
    for t in range(t_max + 1):
        if any(view.action_set(h).max() > limits[t] for h in frontier):
            return t
        if t == t_max:
            break
        nxt = []
        for h in frontier:
            aset, _ = view.expand(h)
            nxt.extend(h + (a,) for a in aset)
        frontier = nxt
    return t_max + 1


def example43_lambda_bounds(params: Example43Params, n: int, seed: int, t_max: int = 3, z: float = DEFAULT_Z,
                            workers: Optional[int] = None) -> CheckResult:
    """mu(Lambda_t | Lambda_0 .. Lambda_{t-1}) >= r_t^{m_0 ... m_{t-1}} on sampled trees."""
    family = example43(params)
    t_max = min(t_max, len(params.block_sizes) - 1)
    limits, acc = [], 0
    for size in params.block_sizes:
        acc += size
        limits.append(acc - 1)
    depths = run_indexed(
        lambda i: _lambda_depth(LazyTree(family, 0, seeding.derive_seed(seed, "lambda", i)), limits, t_max),
        n, workers)
    rows = []
    passed = True
    width = 1
    for t in range(t_max + 1):
        pool = sum(1 for d in depths if d >= t)
        hits = sum(1 for d in depths if d >= t + 1)
        estimate = Estimate.binomial(hits, pool, z, seed, f"lambda_{t}")
        bound = params.r[t] ** width
        ok = pool > 0 and estimate.point >= bound - z * estimate.stderr - 1e-12
        passed &= ok
        rows.append({"stage": t, "conditioned": pool, "frequency": estimate.point, "se": estimate.stderr,
                     "bound": bound, "passed": ok})
        width *= params.block_sizes[t]
    return CheckResult("example43-lambda", passed, {"block_sizes": list(params.block_sizes), "stages": rows})
