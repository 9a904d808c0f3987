# app/distmodel.py
"""
Stage-indexed primitive distributions, cardinality laws and their PGFs.

This module holds the probabilistic core shared by every other module:
- `PrimitiveDistribution`: a finite law over action sets for one stage.
- `DistributionFamily`: the stage-indexed sequence p_0, p_1, ...
- `DiscreteLaw` / `CardinalityLaw`: laws on the naturals, with explicit
  accounting of any mass lost to truncation.
- The analytic checkers used as theorem preconditions: stochastic dominance,
  the Lamperti condition, moments and the infinite-mean test.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import kstwo, norm

from app.actionset import ActionSet
from app.exceptions import DistributionError, DomainError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061
EXP_NEG_EULER_GAMMA = math.exp(-EULER_GAMMA)

MAX_TAIL_MASS = 1e-12
NORMALIZATION_TOLERANCE = 1e-9
CAP_WARNING_MASS = 1e-6
DOMINANCE_SLACK = 1e-12


# --- Laws on the naturals ---
@dataclass(frozen=True)
class DiscreteLaw:
    """
    A law on {0, 1, 2, ...} given by finitely many atoms.

    `tail_mass_bound` is the mass known to sit beyond the listed atoms (lost
    to truncation); the atoms' masses sum to 1 - tail_mass_bound.
    """
    values: tuple[int, ...]
    masses: tuple[float, ...]
    tail_mass_bound: float = 0.0

    def __post_init__(self):
        if len(self.values) != len(self.masses) or not self.values:
            raise DistributionError("A law needs matching, non-empty value and mass lists.")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise DistributionError("Law values must be strictly increasing.")
        if self.values[0] < 0:
            raise DistributionError("Law values must be natural numbers.")
        if any(not m > 0 for m in self.masses):
            raise DistributionError("Listed masses must be strictly positive.")
        if self.tail_mass_bound < 0:
            raise DistributionError("Tail mass bound must be non-negative.")
        total = math.fsum(self.masses) + self.tail_mass_bound
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise DistributionError(f"Law masses plus tail sum to {total!r}, expected 1.")

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, float], tail_mass_bound: float = 0.0):
        items = sorted((int(v), float(m)) for v, m in pmf.items() if m > 0)
        return cls(tuple(v for v, _ in items), tuple(m for _, m in items), float(tail_mass_bound))

    @classmethod
    def dirac(cls, value: int):
        return cls((int(value),), (1.0,))

    @cached_property
    def value_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    @cached_property
    def mass_array(self) -> np.ndarray:
        return np.array(self.masses, dtype=np.float64)

    @cached_property
    def cdf_array(self) -> np.ndarray:
        """F at each listed atom."""
        return np.minimum(np.cumsum(self.mass_array), 1.0 - self.tail_mass_bound)

    @property
    def pmf(self) -> dict[int, float]:
        return dict(zip(self.values, self.masses))

    def mass(self, n: int) -> float:
        return self.pmf.get(int(n), 0.0)

    def cdf(self, n: float) -> float:
        """F(n) = total listed mass at atoms <= n."""
        i = int(np.searchsorted(self.value_array, n, side="right"))
        return 0.0 if i == 0 else float(self.cdf_array[i - 1])

    def survival(self, n: float) -> float:
        """1 - F(n), with the tail counted as lying beyond every atom."""
        return max(0.0, 1.0 - self.cdf(n))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws atoms (as int64) by inverse transform on the listed masses."""
        return self.values_at(rng.random(size))

    def values_at(self, u: np.ndarray) -> np.ndarray:
        """Inverse transform: smallest atom whose normalised CDF exceeds u."""
        total = float(self.cdf_array[-1])
        idx = np.searchsorted(self.cdf_array / total, u, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        return np.asarray(self.values, dtype=np.int64)[idx]


@dataclass(frozen=True)
class CardinalityLaw(DiscreteLaw):
    """A law of #A: supported on {1, 2, ...}."""

    def __post_init__(self):
        super().__post_init__()
        if self.values[0] < 1:
            raise DistributionError("A cardinality law cannot put mass on 0.")


# --- Primitive distributions and families ---
@dataclass(frozen=True)
class PrimitiveDistribution:
    """A stage law p_t over finitely many distinct action sets."""
    sets: tuple[ActionSet, ...]
    masses: tuple[float, ...]
    tail_mass_bound: float = 0.0

    def __post_init__(self):
        if not self.sets or len(self.sets) != len(self.masses):
            raise DistributionError("A primitive distribution needs matching, non-empty set and mass lists.")
        if len(set(self.sets)) != len(self.sets):
            raise DistributionError("Action sets in a primitive distribution must be pairwise distinct.")
        if any(not m > 0 for m in self.masses):
            raise DistributionError("Listed masses must be strictly positive.")
        if not 0 <= self.tail_mass_bound <= MAX_TAIL_MASS:
            raise DistributionError(f"Tail mass bound {self.tail_mass_bound} exceeds {MAX_TAIL_MASS}.")
        total = math.fsum(self.masses) + self.tail_mass_bound
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise DistributionError(f"Primitive masses sum to {total!r}, expected 1.")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[ActionSet, float]], tail_mass_bound: float = 0.0):
        merged: dict[ActionSet, float] = {}
        for aset, mass in rows:
            merged[aset] = merged.get(aset, 0.0) + float(mass)
        kept = [(a, m) for a, m in merged.items() if m > 0]
        return cls(tuple(a for a, _ in kept), tuple(m for _, m in kept), tail_mass_bound)

    @classmethod
    def dirac(cls, aset: ActionSet):
        return cls((aset,), (1.0,))

    @cached_property
    def _cumulative(self) -> np.ndarray:
        cum = np.cumsum(np.array(self.masses, dtype=np.float64))
        return cum / cum[-1]

    @cached_property
    def _index(self) -> dict[ActionSet, int]:
        return {a: i for i, a in enumerate(self.sets)}

    @cached_property
    def size_array(self) -> np.ndarray:
        return np.array([len(a) for a in self.sets], dtype=np.int64)

    def pick(self, u: np.ndarray | float) -> np.ndarray:
        """Indices of the sets selected by uniforms `u`."""
        idx = np.searchsorted(self._cumulative, u, side="right")
        return np.minimum(idx, len(self.sets) - 1)

    def sample(self, rng: np.random.Generator, size: int) -> list[ActionSet]:
        return [self.sets[i] for i in self.pick(rng.random(size))]

    def mass_of(self, aset: ActionSet) -> float:
        i = self._index.get(aset)
        return 0.0 if i is None else self.masses[i]

    def log_mass(self, aset: ActionSet) -> float:
        m = self.mass_of(aset)
        return math.log(m) if m > 0 else -math.inf


@dataclass(frozen=True)
class DistributionFamily:
    """
    The sequence of primitive distributions p_0, p_1, ...

    `generator` must be a pure function of the stage index; results are
    memoised per stage. `dominating_law` is a declared law dominating every
    stage's cardinality law, `lamperti_range` the range at which its tail is
    examined, and `truncated` marks a family cut down from an infinite one,
    so its finite support is not the support of the law it stands for.
    """
    name: str
    generator: Callable[[int], PrimitiveDistribution]
    time_invariant: bool = False
    note: str = ""
    dominating_law: Optional[DiscreteLaw] = None
    lamperti_range: Optional[int] = None
    truncated: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, compare=False, repr=False)

    def at(self, t: int) -> PrimitiveDistribution:
        if t < 0:
            raise DistributionError(f"Stage index must be non-negative, got {t}.")
        stage = 0 if self.time_invariant else int(t)
        cached = self._cache.get(stage)
        if cached is None:
            cached = self.generator(stage)
            with self._lock:
                self._cache.setdefault(stage, cached)
        return cached

    def advanced(self, t: int) -> DistributionFamily:
        """The family seen from stage t: stage s maps to the original stage s+t."""
        if t == 0:
            return self
        return DistributionFamily(
            name=f"{self.name}+{t}",
            generator=lambda s, _f=self, _t=t: _f.at(s + _t),
            time_invariant=self.time_invariant,
            note=self.note,
            dominating_law=self.dominating_law,
            lamperti_range=self.lamperti_range,
            truncated=self.truncated,
        )


# --- Cardinality laws and PGFs ---
def cardinality_law(p: PrimitiveDistribution) -> CardinalityLaw:
    """Law of #A under p: total mass of the action sets of each size."""
    pmf: dict[int, float] = {}
    for aset, mass in zip(p.sets, p.masses):
        pmf[len(aset)] = pmf.get(len(aset), 0.0) + mass
    return CardinalityLaw.from_pmf(pmf, p.tail_mass_bound)


def pgf_eval(q: DiscreteLaw, x: float) -> float:
    """Evaluates sum_n q(n) x^n for x in [0, 1]."""
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise DomainError(f"PGF argument must lie in [0, 1], got {x}.")
    if x == 1.0:
        return float(math.fsum(q.masses))
    return float(np.dot(q.mass_array, np.power(x, q.value_array)))


def pgf_derivative(q: DiscreteLaw, x: float) -> float:
    """First derivative of the PGF at x in [0, 1] (infinite-mean laws give large values at x=1)."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"PGF argument must lie in [0, 1], got {x}.")
    v = q.value_array
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(v > 0, v * np.power(x, np.maximum(v - 1, 0)), 0.0)
    return float(np.dot(q.mass_array, terms))


def _trimmed(vec: np.ndarray, lo: int = 0) -> tuple[int, np.ndarray]:
    """(offset, masses) with leading and trailing zeros removed."""
    nz = np.flatnonzero(vec)
    if nz.size == 0:
        return lo, np.zeros(0)
    return lo + int(nz[0]), vec[nz[0]: nz[-1] + 1]


def _convolve_capped(a: tuple[int, np.ndarray], b: tuple[int, np.ndarray], n_max: int) -> tuple[int, np.ndarray]:
    lo = a[0] + b[0]
    if not a[1].size or not b[1].size or lo > n_max:
        return lo, np.zeros(0)
    return _trimmed(np.convolve(a[1], b[1])[: n_max - lo + 1], lo)


def _convolution_power(base: tuple[int, np.ndarray], k: int, n_max: int) -> tuple[int, np.ndarray]:
    result = (0, np.ones(1))
    while k:
        if k & 1:
            result = _convolve_capped(result, base, n_max)
        k >>= 1
        if k:
            base = _convolve_capped(base, base, n_max)
    return result


def compose_cardinality(family: DistributionFamily, t: int, m: int, n_max: int = 4096) -> CardinalityLaw:
    """
    Law of #omega_m under mu_t, i.e. the law whose PGF is g_t o ... o g_{t+m-1}.

    Works backward from stage t+m-1: the law of #omega_k from stage j is the
    q_j-mixture of convolution powers of the law from stage j+1. Powers are
    taken only at the atoms of q_j, on arrays trimmed to their support.
    Support is capped at `n_max`; mass pushed past the cap is recorded as
    tail mass.
    """
    if m < 0 or n_max < 1:
        raise DistributionError(f"compose_cardinality needs m >= 0 and n_max >= 1, got m={m}, n_max={n_max}.")
    current = (1, np.ones(1))
    for stage in range(t + m - 1, t - 1, -1):
        q = cardinality_law(family.at(stage))
        mixed = np.zeros(n_max + 1)
        power, reached = (0, np.ones(1)), 0
        for n, weight in zip(q.values, q.masses):
            if n > n_max:
                break
            power = _convolve_capped(power, _convolution_power(current, n - reached, n_max), n_max)
            reached = n
            lo, vec = power
            if not vec.size:
                break
            mixed[lo: lo + vec.size] += weight * vec
        current = _trimmed(mixed)
    lo, vec = current
    kept = {lo + i: float(vec[i]) for i in np.flatnonzero(vec > 0)}
    tail = max(0.0, 1.0 - math.fsum(kept.values()))
    if tail > CAP_WARNING_MASS:
        logger.warning(f"Composition cap n_max={n_max} discarded mass {tail:.3e} (t={t}, m={m}).")
    return CardinalityLaw.from_pmf(kept, tail)


def dominates(q: DiscreteLaw, r: DiscreteLaw) -> bool:
    """True iff q first-order stochastically dominates r (F_q <= F_r up to tail slack)."""
    points = np.union1d(q.value_array, r.value_array)
    slack = q.tail_mass_bound + r.tail_mass_bound + DOMINANCE_SLACK
    for n in points:
        if q.cdf(n) > r.cdf(n) + slack:
            return False
    return True


def dominating_envelope(laws: Sequence[DiscreteLaw]) -> DiscreteLaw:
    """The least law dominating every law in `laws`: F(n) = min_i F_i(n)."""
    if not laws:
        raise DistributionError("Envelope of an empty collection is undefined.")
    points = laws[0].value_array
    for law in laws[1:]:
        points = np.union1d(points, law.value_array)
    cdf = np.array([min(law.cdf(n) for law in laws) for n in points])
    masses = np.diff(np.concatenate([[0.0], cdf]))
    pmf = {int(v): float(m) for v, m in zip(points, masses) if m > 0}
    tail = max(0.0, 1.0 - math.fsum(pmf.values()))
    law_cls = CardinalityLaw if points[0] >= 1 else DiscreteLaw
    return law_cls.from_pmf(pmf, tail)


class LampertiVerdict(NamedTuple):
    sup_estimate: float
    verdict: bool
    argmax: int
    settled: bool
    threshold: float = EXP_NEG_EULER_GAMMA


def lamperti_check(q: DiscreteLaw, n_probe: int) -> LampertiVerdict:
    """
    Proxy for limsup n (1 - F(n)) < e^{-gamma}: the sup over [n_probe/2, n_probe].

    n (1 - F(n)) increases between atoms, so the sup over the window is
    attained just below an atom or at the right edge; only those points are
    evaluated.
    """
    if n_probe < 1:
        raise DistributionError("n_probe must be at least 1.")
    lo = max(1, n_probe // 2)
    atoms = [v for v in q.values if lo < v <= n_probe]
    candidates = sorted(set([lo, n_probe] + [v - 1 for v in atoms]))
    values = [n * q.survival(n) for n in candidates]
    best = int(np.argmax(values))
    sup_estimate = float(values[best])
    interior = max(values[:-1]) if len(values) > 1 else values[0]
    settled = not (values[-1] > interior + 1e-12 and values[-1] > 0)
    if not settled:
        logger.warning(f"Lamperti probe not settled: n(1-F(n)) is still rising at n={n_probe}.")
    return LampertiVerdict(sup_estimate, sup_estimate < EXP_NEG_EULER_GAMMA, candidates[best], settled)


@dataclass(frozen=True)
class LawMoments:
    mean: float
    variance: float
    mean_finite: bool
    variance_finite: bool


def _diverges(contributions: np.ndarray) -> bool:
    """Cauchy-style test: do the last quarter of the terms still carry weight?"""
    if len(contributions) < 4:
        return False
    total = float(contributions.sum())
    if total <= 0:
        return False
    last = contributions[-max(2, len(contributions) // 4):]
    return float(last.sum()) > 1e-3 * total


def law_moments(q: DiscreteLaw) -> LawMoments:
    """Mean and variance of the listed atoms; a truncated heavy tail is reported as infinite."""
    v = q.value_array
    w = q.mass_array
    mean_terms = v * w
    mean = float(mean_terms.sum())
    second_terms = v * v * w
    mean_finite = True
    variance_finite = True
    if q.tail_mass_bound > 0:
        mean_finite = not _diverges(mean_terms)
        variance_finite = mean_finite and not _diverges(second_terms)
    if not mean_finite:
        return LawMoments(math.inf, math.inf, False, False)
    variance = float(np.dot(w, (v - mean) ** 2))
    if not variance_finite:
        return LawMoments(mean, math.inf, True, False)
    return LawMoments(mean, variance, True, True)


def log_product(factors: Iterable[float]) -> float:
    """log of a product of factors in (0, 1], accumulated with log1p."""
    total = 0.0
    for f in factors:
        if f <= 0:
            return -math.inf
        total += math.log1p(f - 1.0)
    return total


# --- Sample comparisons ---
def dkw_epsilon(n: int, alpha: float) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band for an n-sample empirical CDF."""
    if n < 1 or not 0 < alpha < 1:
        raise DistributionError(f"DKW band needs n >= 1 and alpha in (0, 1), got n={n}, alpha={alpha}.")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def ks_pvalue(gap: float, n: int) -> float:
    """Kolmogorov p-value of a sup gap; conservative when the reference law is discrete."""
    return float(kstwo.sf(gap, n))


def z_for_confidence(level: float) -> float:
    """Two-sided normal quantile, e.g. 0.997 -> about 2.97."""
    if not 0 < level < 1:
        raise DistributionError(f"Confidence level must lie in (0, 1), got {level}.")
    return float(norm.ppf(0.5 + level / 2.0))


def empirical_law(samples: Iterable[int]) -> dict[int, float]:
    values, counts = np.unique(np.asarray(list(samples), dtype=np.int64), return_counts=True)
    total = counts.sum()
    return {int(v): float(c) / total for v, c in zip(values, counts)}


def total_variation(empirical: Mapping[int, float], law: DiscreteLaw) -> float:
    """TV distance between an empirical pmf and a law; the law's tail counts as unmatched mass."""
    support = set(empirical) | set(law.values)
    pmf = law.pmf
    gap = math.fsum(abs(empirical.get(n, 0.0) - pmf.get(n, 0.0)) for n in support)
    return 0.5 * (gap + law.tail_mass_bound)
