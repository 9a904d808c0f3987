# app/families.py
"""
Built-in distribution families and loading of families from config specs.

Built-ins:
- `example42`: the Example 4.2 family with the stage-index correction (see
  `EXAMPLE42_CORRECTION`); `example42-literal` is the table as printed.
- `example43` / `example43-small`: time-invariant partition families.
- `example45`: the 13-atom family whose cardinality law has mean 4.
- `dirac-singletons`: every action set is {action} (the dummy Controller).
- `bernoulli-two-sets`: two sets with a configurable probability.
- `tiny`: {1, 2} or {0}, the exact-enumeration instance for MDP checks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from app.actionset import ActionSet
from app.distmodel import (
    CardinalityLaw,
    DistributionFamily,
    PrimitiveDistribution,
)
from app.exceptions import ConfigError, DistributionError

logger = logging.getLogger(__name__)

EXAMPLE42_CORRECTION = (
    "Example 4.2 table advanced by one stage: p_t({0}) = 1 - 2^-(t+1) and "
    "p_t({0,...,(t+1)2^(t+1)}) = 2^-(t+1). The printed table has p_0({0}) = 0 "
    "and a stage-0 big set equal to {0}; the shifted table reproduces "
    "mu(E_1) = 1/2, the delta-tree mass prod(1 - 2^-(t+1)) and the stagewise "
    "product prod_{t>=1}[1 - (1 - 2^-(t+1))^(t 2^t)]."
)

EXAMPLE45_ROWS = 12
EXAMPLE45_Q_TERMS = 40
EXAMPLE45_LAMPERTI_PROBE = 2 ** 20


# --- Example 4.2 ---
def example42_big_set(t: int) -> ActionSet:
    return ActionSet.interval(0, (t + 1) * 2 ** (t + 1))


def _example42_stage(t: int) -> PrimitiveDistribution:
    big_mass = 2.0 ** -(t + 1)
    return PrimitiveDistribution(
        (ActionSet.singleton(0), example42_big_set(t)),
        (1.0 - big_mass, big_mass),
    )


def _example42_literal_stage(t: int) -> PrimitiveDistribution:
    big_mass = 2.0 ** -t
    return PrimitiveDistribution.from_rows([
        (ActionSet.singleton(0), 1.0 - big_mass),
        (ActionSet.interval(0, t * 2 ** t), big_mass),
    ])


def example42() -> DistributionFamily:
    return DistributionFamily("example42", _example42_stage, False, EXAMPLE42_CORRECTION)


def example42_literal() -> DistributionFamily:
    return DistributionFamily("example42-literal", _example42_literal_stage, False,
                              "Example 4.2 table exactly as printed.")


# --- Example 4.3 ---
@dataclass(frozen=True)
class Example43Params:
    """Block sizes m_t and cumulative probabilities r_t of a partition family."""
    block_sizes: tuple[int, ...]
    r: tuple[float, ...]

    def __post_init__(self):
        if len(self.block_sizes) != len(self.r) or not self.block_sizes:
            raise DistributionError("Example 4.3 needs as many r_t as block sizes.")
        if any(b <= a for a, b in zip(self.r, self.r[1:])) or self.r[0] <= 0:
            raise DistributionError("r_t must be positive and strictly increasing.")
        if abs(self.r[-1] - 1.0) > 1e-12:
            raise DistributionError("The last r_t of a finite instance must be 1.")

    @property
    def block_starts(self) -> tuple[int, ...]:
        starts, acc = [], 0
        for size in self.block_sizes:
            starts.append(acc)
            acc += size
        return tuple(starts)

    def block(self, t: int) -> ActionSet:
        start = self.block_starts[t]
        return ActionSet.interval(start, start + self.block_sizes[t] - 1)


def example43_small_params() -> Example43Params:
    return Example43Params((1, 2, 4, 8), (0.3, 0.6, 0.85, 1.0))


def example43_sequence(n_blocks: int) -> tuple[list[float], list[float]]:
    """
    Shipped sequence m_0 = 1, m_t = (t+1)^3 prod_{i<t} m_i, r_t = 2^{-(t+1)/m_t}.

    Returns (log m_t, log(-log r_t)); both stay finite long after m_t
    itself overflows a float.
    """
    log_m, log_neg_log_r = [0.0], [math.log(math.log(2.0))]
    log_prod = 0.0
    for t in range(1, n_blocks):
        lm = 3.0 * math.log(t + 1) + log_prod
        log_m.append(lm)
        log_neg_log_r.append(math.log((t + 1) * math.log(2.0)) - lm)
        log_prod += lm
    return log_m, log_neg_log_r


def example43_printed_sequence(n_blocks: int) -> tuple[list[float], list[float]]:
    """The printed sequence m_t = t^3 prod_{i<t} m_i, r_t = 2^{-t/m_t} (r_0 = 1)."""
    log_m, log_neg_log_r = [0.0], [-math.inf]
    log_prod = 0.0
    for t in range(1, n_blocks):
        lm = 3.0 * math.log(t) + log_prod
        log_m.append(lm)
        log_neg_log_r.append(math.log(t * math.log(2.0)) - lm)
        log_prod += lm
    return log_m, log_neg_log_r


def example43_conditions(log_m: list[float], log_neg_log_r: list[float]) -> dict[str, Any]:
    """
    Checks conditions (a)-(c) on a finite prefix, in log space.

    (b) is reported as log prod_{t>=1} r_t^{m_0...m_{t-1}} and (c) as
    log prod_t (1 - r_t^{m_t}); a condition holds when its log is finite.
    """
    m_increasing = log_m[0] == 0.0 and all(b > a for a, b in zip(log_m, log_m[1:]))
    # r_t in (0,1) increasing <=> -log r_t positive and decreasing
    r_ok = all(math.isfinite(x) for x in log_neg_log_r) and all(
        b < a for a, b in zip(log_neg_log_r, log_neg_log_r[1:]))
    log_b, log_prod = 0.0, log_m[0]
    for t in range(1, len(log_m)):
        log_b -= math.exp(log_prod + log_neg_log_r[t])
        log_prod += log_m[t]
    log_c = 0.0
    for lm, lnlr in zip(log_m, log_neg_log_r):
        r_pow_m = math.exp(-math.exp(lnlr + lm))
        log_c += math.log1p(-r_pow_m) if r_pow_m < 1.0 else -math.inf
    return {
        "a_holds": bool(m_increasing and r_ok),
        "log_b": log_b,
        "b_holds": math.isfinite(log_b),
        "log_c": log_c,
        "c_holds": math.isfinite(log_c),
    }


def example43(params: Example43Params, truncated: bool = False) -> DistributionFamily:
    """Time-invariant family choosing block M_t with probability r_t - r_{t-1}."""
    rows = []
    previous = 0.0
    for t, r in enumerate(params.r):
        rows.append((params.block(t), r - previous))
        previous = r
    dist = PrimitiveDistribution.from_rows(rows)
    label = ",".join(str(m) for m in params.block_sizes)
    return DistributionFamily(f"example43[{label}]", lambda _t: dist, True,
                              "Blocks are contiguous: M_0 = {0..m_0-1}, M_1 next, ...", truncated=truncated)


def example43_genuine(n_blocks: int = 3) -> DistributionFamily:
    """
    The shipped sequence truncated to `n_blocks` blocks, with r of the last
    block raised to 1. Only the first two or three blocks are materialisable.
    """
    log_m, log_neg_log_r = example43_sequence(n_blocks)
    sizes = tuple(int(round(math.exp(lm))) for lm in log_m)
    r = [math.exp(-math.exp(x)) for x in log_neg_log_r]
    r[-1] = 1.0
    return example43(Example43Params(sizes, tuple(r)), truncated=True)


# --- Example 4.5 ---
def _example45_stage(t: int) -> PrimitiveDistribution:
    big = [(ActionSet.interval(0, 2 ** (t + i)), 0.25 * 2.0 ** -(t + i)) for i in range(EXAMPLE45_ROWS)]
    zero_mass = 1.0 - math.fsum(m for _, m in big)
    return PrimitiveDistribution.from_rows([(ActionSet.singleton(0), zero_mass)] + big)


def example45() -> DistributionFamily:
    return DistributionFamily("example45", _example45_stage, False,
                              dominating_law=example45_q(), lamperti_range=EXAMPLE45_LAMPERTI_PROBE)


def example45_q() -> CardinalityLaw:
    """q(1) = 1/2, q(1 + 2^t) = 2^-t / 4, truncated so the tail is below 1e-12."""
    pmf = {1: 0.5}
    for t in range(EXAMPLE45_Q_TERMS):
        pmf[1 + 2 ** t] = pmf.get(1 + 2 ** t, 0.0) + 0.25 * 2.0 ** -t
    tail = 0.5 * 2.0 ** -EXAMPLE45_Q_TERMS
    return CardinalityLaw.from_pmf(pmf, tail)


# --- Generic families ---
def dirac_singletons(action: int = 0) -> DistributionFamily:
    dist = PrimitiveDistribution.dirac(ActionSet.singleton(action))
    return DistributionFamily(f"dirac-singletons[{action}]", lambda _t: dist, True)


def bernoulli_two_sets(a: ActionSet, b: ActionSet, prob: float) -> DistributionFamily:
    """Set `a` with probability `prob`, otherwise `b`."""
    if not 0.0 < prob < 1.0:
        raise DistributionError(f"prob must lie strictly inside (0, 1), got {prob}.")
    dist = PrimitiveDistribution((a, b), (prob, 1.0 - prob))
    return DistributionFamily(f"bernoulli-two-sets[{a}|{b}|{prob}]", lambda _t: dist, True)


def table_family(stages: Mapping[int, PrimitiveDistribution], default: PrimitiveDistribution | None,
                 name: str = "table") -> DistributionFamily:
    """Per-stage table; stages not listed use `default` (or the last listed stage)."""
    if not stages and default is None:
        raise ConfigError("A table family needs at least one stage or a default.")
    last = max(stages) if stages else None
    fallback = default if default is not None else stages[last]

    def generator(t: int) -> PrimitiveDistribution:
        return stages.get(t, fallback)

    return DistributionFamily(name, generator, time_invariant=not stages)


def tiny_instance() -> DistributionFamily:
    """{1, 2} or {0} with probability 1/2 each: small enough for exact MDP enumeration."""
    return bernoulli_two_sets(ActionSet.of([1, 2]), ActionSet.singleton(0), 0.5)


# --- Config loading ---
def _parse_set(value: Any) -> ActionSet:
    if isinstance(value, str):
        return ActionSet.parse(value)
    if isinstance(value, int):
        return ActionSet.singleton(value)
    if isinstance(value, (list, tuple)):
        return ActionSet.of(value)
    raise ConfigError(f"Cannot read an action set from {value!r}.")


def _parse_rows(rows: Any) -> PrimitiveDistribution:
    if not isinstance(rows, list) or not rows:
        raise ConfigError("Table rows must be a non-empty list.")
    parsed = []
    for row in rows:
        if not isinstance(row, dict) or set(row) != {"set", "mass"}:
            raise ConfigError(f"Each table row needs exactly 'set' and 'mass', got {row!r}.")
        parsed.append((_parse_set(row["set"]), float(row["mass"])))
    try:
        return PrimitiveDistribution.from_rows(parsed)
    except DistributionError as e:
        raise ConfigError(f"Invalid table rows: {e}") from e


BUILTIN_FAMILIES: dict[str, Callable[..., DistributionFamily]] = {
    "example42": example42,
    "example42-literal": example42_literal,
    "example43": lambda block_sizes=None, r=None, n_blocks=3: (
        example43(Example43Params(tuple(block_sizes), tuple(r))) if block_sizes is not None
        else example43_genuine(n_blocks)
    ),
    "example43-small": lambda: example43(example43_small_params()),
    "example45": example45,
    "dirac-singletons": lambda action=0: dirac_singletons(int(action)),
    "bernoulli-two-sets": lambda a, b, prob: bernoulli_two_sets(_parse_set(a), _parse_set(b), float(prob)),
    "tiny": tiny_instance,
}


def family_from_config(spec: Any) -> DistributionFamily:
    """
    Builds a family from a config spec.

    Accepted forms: a built-in name string, `{builtin: name, params: {...}}`,
    or `{table: {stages: {t: rows}, default: rows}}`.
    """
    if isinstance(spec, str):
        spec = {"builtin": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"A family spec must be a name or a mapping, got {spec!r}.")
    if "builtin" in spec:
        unknown = set(spec) - {"builtin", "params"}
        if unknown:
            raise ConfigError(f"Unknown family keys: {sorted(unknown)}")
        name = spec["builtin"]
        factory = BUILTIN_FAMILIES.get(name)
        if factory is None:
            raise ConfigError(f"Unknown built-in family '{name}'. Known: {sorted(BUILTIN_FAMILIES)}")
        try:
            return factory(**(spec.get("params") or {}))
        except (TypeError, DistributionError) as e:
            raise ConfigError(f"Bad parameters for family '{name}': {e}") from e
    if "table" in spec:
        table = spec["table"]
        if not isinstance(table, dict) or set(table) - {"stages", "default"}:
            raise ConfigError("A table family takes only 'stages' and 'default'.")
        stages = {int(t): _parse_rows(rows) for t, rows in (table.get("stages") or {}).items()}
        default = _parse_rows(table["default"]) if "default" in table else None
        return table_family(stages, default)
    raise ConfigError("A family spec needs either 'builtin' or 'table'.")
