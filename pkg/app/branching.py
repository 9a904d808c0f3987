# app/branching.py
"""
Branching processes in varying environments and maximal branching processes.

The generation sizes #omega_t of a sampled tree form a branching process whose
stage-t offspring law is #p_t; counting only goal-accepted actions gives the
z-process used for all-nonzero goals. A maximal branching process keeps only
the largest offspring count of each generation, which is how a one-step
maximizing Controller sees its options.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from app import seeding
from app.distmodel import (
    DiscreteLaw,
    DistributionFamily,
    cardinality_law,
    dkw_epsilon,
    ks_pvalue,
    law_moments,
    pgf_eval,
)
from app.exceptions import DegenerateMeanError, DistributionError, PopulationBudgetExceededError
from app.goals import Goal

logger = logging.getLogger(__name__)

DEFAULT_POPULATION_BUDGET = 10_000_000
MAX_OF_IID_LIMIT = 1024


# --- Offspring families ---
@dataclass(frozen=True)
class OffspringFamily:
    """Stage t -> offspring law on {0, 1, ...}; memoised like `DistributionFamily`."""
    name: str
    law_at: Callable[[int], DiscreteLaw]
    time_invariant: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, compare=False, repr=False)

    def at(self, t: int) -> DiscreteLaw:
        stage = 0 if self.time_invariant else int(t)
        law = self._cache.get(stage)
        if law is None:
            law = self.law_at(stage)
            with self._lock:
                self._cache.setdefault(stage, law)
        return law


def offspring_from_cardinality(family: DistributionFamily) -> OffspringFamily:
    """#p_t as offspring law: the generation-size process of trees under the family."""
    return OffspringFamily(f"#{family.name}", lambda t: cardinality_law(family.at(t)), family.time_invariant)


def accepted_offspring(family: DistributionFamily, goal: Goal) -> OffspringFamily:
    """Law of the number of goal-accepted actions in a p_t-distributed set."""
    def law(t: int) -> DiscreteLaw:
        dist = family.at(t)
        pmf: dict[int, float] = {}
        for aset, mass in zip(dist.sets, dist.masses):
            n = goal.count_accepted(t, aset)
            pmf[n] = pmf.get(n, 0.0) + mass
        return DiscreteLaw.from_pmf(pmf, dist.tail_mass_bound)

    invariant = family.time_invariant and goal.predicate.time_invariant
    return OffspringFamily(f"{goal.name}|{family.name}", law, invariant)


def offspring_from_pmf(pmf: dict[int, float], name: str = "pmf") -> OffspringFamily:
    law = DiscreteLaw.from_pmf(pmf)
    return OffspringFamily(name, lambda t: law, time_invariant=True)


def offspring_from_laws(laws: Callable[[int], DiscreteLaw], name: str) -> OffspringFamily:
    return OffspringFamily(name, laws)


def dirac_offspring(n: int) -> OffspringFamily:
    return offspring_from_pmf({n: 1.0}, name=f"dirac({n})")


# --- BPVE simulation ---
def _next_generation(law: DiscreteLaw, z: int, rng: np.random.Generator, budget: int) -> int:
    if z == 0:
        return 0
    masses = law.mass_array / law.mass_array.sum()
    counts = rng.multinomial(z, masses)
    total = float(np.dot(counts.astype(np.float64), law.value_array))
    if total > budget:
        raise PopulationBudgetExceededError(f"Generation size {total:.3e} exceeds the population budget of {budget}.")
    return int(np.dot(counts.astype(np.int64), np.asarray(law.values, dtype=np.int64)))


def simulate_bpve(off: OffspringFamily, t0: int, T: int, rng: np.random.Generator,
                  population_budget: int = DEFAULT_POPULATION_BUDGET) -> np.ndarray:
    """
    Z_0 = 1 and Z_{k+1} = sum of Z_k independent draws from the stage-(t0+k) law.

    Raises:
        PopulationBudgetExceededError: if a generation exceeds the budget.
    """
    if T < 1:
        raise DistributionError(f"Horizon must be at least 1, got {T}.")
    sizes = np.zeros(T + 1, dtype=np.int64)
    sizes[0] = 1
    for k in range(T):
        sizes[k + 1] = _next_generation(off.at(t0 + k), int(sizes[k]), rng, population_budget)
        if sizes[k + 1] == 0:
            break
    return sizes


def simulate_bpve_batch(off: OffspringFamily, t0: int, T: int, n: int, seed: int,
                        population_budget: int = DEFAULT_POPULATION_BUDGET,
                        start: int = 0) -> np.ndarray:
    """Trajectories for trial indices start..start+n-1, each on its own derived stream."""
    rows = np.zeros((n, T + 1), dtype=np.int64)
    for i in range(n):
        rows[i] = simulate_bpve(off, t0, T, seeding.generator(seed, "bpve", start + i), population_budget)
    return rows


def extinction_iteration(off: OffspringFamily, t0: int, T: int) -> float:
    """P(Z_T = 0) = f_{t0}(f_{t0+1}(... f_{t0+T-1}(0) ...))."""
    if T < 1:
        raise DistributionError(f"Horizon must be at least 1, got {T}.")
    x = 0.0
    for k in range(t0 + T - 1, t0 - 1, -1):
        x = min(1.0, pgf_eval(off.at(k), x))
    return x


def extinction_profile(off: OffspringFamily, t0: int, T_max: int) -> list[float]:
    """Extinct-by-T probabilities for T = 1..T_max."""
    return [extinction_iteration(off, t0, T) for T in range(1, T_max + 1)]


# --- Fearn's criterion ---
@dataclass
class FearnReport:
    means: list[float]
    variances: list[float]
    summands: list[float]
    partial_sums: list[float]
    convergent: bool
    method: str
    label: str = "heuristic"

    def to_dict(self) -> dict[str, Any]:
        return {
            "means": self.means,
            "variances": self.variances,
            "summands": self.summands,
            "partial_sums": self.partial_sums,
            "convergent": self.convergent,
            "method": self.method,
            "label": self.label,
        }


def fearn_criterion(off: OffspringFamily, T_max: int, t0: int = 0) -> FearnReport:
    """
    Partial sums of sigma_j^2 / (m_{0} ... m_{j-1} * m_j^2) for j < T_max.

    The running product starts at m_0, so the j = 0 summand is
    sigma_0^2 / m_0^2. Starting it at m_1 instead only rescales every summand
    from j = 1 on by m_0, which leaves convergence unchanged.

    Convergence is judged by a ratio test on the last quarter of the
    summands, so the verdict is a heuristic.

    Raises:
        DegenerateMeanError: if some stage mean is zero.
    """
    means, variances, summands, partial = [], [], [], []
    log_prod = 0.0
    running = 0.0
    for j in range(T_max):
        moments = law_moments(off.at(t0 + j))
        if moments.mean == 0:
            raise DegenerateMeanError(f"Stage {t0 + j} offspring mean is zero.")
        if not moments.variance_finite:
            means.append(moments.mean)
            variances.append(math.inf)
            summands.append(math.inf)
            partial.append(math.inf)
            return FearnReport(means, variances, summands, partial, False, "infinite variance")
        term = moments.variance / (math.exp(log_prod) * moments.mean ** 2)
        running += term
        means.append(moments.mean)
        variances.append(moments.variance)
        summands.append(term)
        partial.append(running)
        log_prod += math.log(moments.mean)
    convergent, method = _ratio_test(summands, partial)
    return FearnReport(means, variances, summands, partial, convergent, method)


def _ratio_test(summands: Sequence[float], partial: Sequence[float]) -> tuple[bool, str]:
    if not summands or partial[-1] == 0:
        return True, "all summands zero"
    tail = list(summands[-max(3, len(summands) // 4):])
    ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0]
    if ratios and max(ratios) < 0.99:
        return True, f"ratio test (max tail ratio {max(ratios):.4f})"
    if tail[-1] <= 1e-12 * partial[-1]:
        return True, "negligible tail"
    return False, f"ratio test (max tail ratio {max(ratios) if ratios else math.nan:.4f})"


# --- Maximal branching processes ---
@dataclass(frozen=True)
class MbpKernel:
    """P(Y_{t+1} <= n | Y_t = y) = F(n)^y for the offspring law q."""
    q: DiscreteLaw

    def cdf(self, n: float) -> float:
        return self.q.cdf(n)

    def step_cdf(self, n: float, y: int) -> float:
        return self.q.cdf(n) ** y


def mbp_step(kernel: MbpKernel, y: int, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """`size` independent draws of Y_{t+1} given Y_t = y."""
    if y <= MAX_OF_IID_LIMIT:
        return kernel.q.sample(rng, size * y).reshape(size, y).max(axis=1)
    u = np.power(rng.random(size), 1.0 / y)
    return kernel.q.values_at(u)


def simulate_mbp(kernel: MbpKernel, T: int, rng: np.random.Generator, y0: int = 1) -> np.ndarray:
    """Y_0 = y0 and T kernel steps; max of iid draws up to 1024, inverse transform of F^y above."""
    if T < 1:
        raise DistributionError(f"Horizon must be at least 1, got {T}.")
    path = np.zeros(T + 1, dtype=np.int64)
    path[0] = y0
    for t in range(T):
        path[t + 1] = int(mbp_step(kernel, int(path[t]), rng)[0])
    return path


def mbp_kernel_check(kernel: MbpKernel, y: int, n: int, seed: int, alpha: float = 0.01) -> dict[str, Any]:
    """Sup distance between the empirical one-step CDF from y and F(n)^y, against the DKW band."""
    draws = np.sort(mbp_step(kernel, y, seeding.generator(seed, "mbp-step", y), n))
    points = np.union1d(np.unique(draws), np.asarray(kernel.q.values, dtype=np.int64))
    points = points[points <= draws[-1]]
    emp_at = np.searchsorted(draws, points, side="right") / n
    exact = np.array([kernel.step_cdf(p, y) for p in points])
    gap = float(np.max(np.abs(emp_at - exact))) if len(points) else 0.0
    band = dkw_epsilon(n, alpha)
    return {"y": y, "n": n, "sup_gap": gap, "dkw_band": band, "alpha": alpha,
            "ks_pvalue": ks_pvalue(gap, n), "passed": gap <= band}


def mbp_recurrence_probe(kernel: MbpKernel, T: int, trials: int, seed: int,
                         atoms: Optional[Sequence[int]] = None, n0: Optional[int] = None) -> dict[str, Any]:
    """
    Finite-horizon recurrence evidence: for each atom n, the share of paths
    that visit n after T/2, plus the share whose post-T/2 minimum is <= n0.
    """
    atoms = list(atoms) if atoms is not None else list(kernel.q.values[:8])
    n0 = n0 if n0 is not None else int(kernel.q.values[0])
    half = T // 2
    returns = {int(a): 0 for a in atoms}
    bounded = 0
    for i in range(trials):
        path = simulate_mbp(kernel, T, seeding.generator(seed, "mbp", T, i))
        late = path[half + 1:]
        for a in returns:
            if np.any(late == a):
                returns[a] += 1
        if late.size and late.min() <= n0:
            bounded += 1
    return {
        "label": "probe",
        "horizon": T,
        "trials": trials,
        "return_frequency": {str(a): c / trials for a, c in returns.items()},
        "bounded_frequency": bounded / trials,
        "n0": n0,
    }


def default_normalizer(off: OffspringFamily, t0: int, T: int) -> list[float]:
    """r_t = product of the stage means m_{t0} ... m_{t0+t-1}, t = 0..T."""
    r = [1.0]
    for k in range(T):
        moments = law_moments(off.at(t0 + k))
        r.append(r[-1] * moments.mean)
    return r


def normalized_growth_probe(off: OffspringFamily, T: int, trials: int, seed: int,
                            r: Optional[Sequence[float]] = None, t0: int = 0,
                            population_budget: int = DEFAULT_POPULATION_BUDGET) -> dict[str, Any]:
    """
    r_t^{-1} Z_t at horizons T/2 and T on trajectories that survive to T.

    Descriptive only: it reports dispersion and the median relative change
    between the two horizons.
    """
    r = list(r) if r is not None else default_normalizer(off, t0, T)
    if any(not x > 0 or math.isinf(x) for x in r[: T + 1]):
        return {"label": "probe", "stabilizing": None, "note": "normalizer undefined (mean zero or infinite)"}
    half = max(1, T // 2)
    w_half, w_full = [], []
    skipped = 0
    for i in range(trials):
        try:
            z = simulate_bpve(off, t0, T, seeding.generator(seed, "growth", i), population_budget)
        except PopulationBudgetExceededError:
            skipped += 1
            continue
        if z[T] > 0:
            w_half.append(z[half] / r[half])
            w_full.append(z[T] / r[T])
    if not w_full:
        return {"label": "probe", "stabilizing": None, "survivors": 0, "skipped": skipped}
    w_half_arr, w_full_arr = np.array(w_half), np.array(w_full)
    rel_change = np.abs(w_full_arr - w_half_arr) / np.maximum(w_full_arr, 1e-300)
    return {
        "label": "probe",
        "survivors": len(w_full),
        "skipped": skipped,
        "horizons": [half, T],
        "mean": [float(w_half_arr.mean()), float(w_full_arr.mean())],
        "std": [float(w_half_arr.std()), float(w_full_arr.std())],
        "quantiles": {
            "q10": float(np.quantile(w_full_arr, 0.1)),
            "q50": float(np.quantile(w_full_arr, 0.5)),
            "q90": float(np.quantile(w_full_arr, 0.9)),
        },
        "median_relative_change": float(np.median(rel_change)),
        "stabilizing": bool(np.median(rel_change) < 0.1),
    }
