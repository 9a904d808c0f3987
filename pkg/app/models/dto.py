# app/models/dto.py
"""
Data Transfer Objects (DTOs) for the results and configuration passed between
the simulation modules, the report service and the CLI.

Every DTO converts to a plain dictionary with `to_dict()` so that reports can
be serialised without knowing the concrete type.
"""
from __future__ import annotations
from dataclasses import dataclass, field, asdict, fields
from typing import Optional, List, Dict, Any, Literal, Tuple
import math
import logging

from app.exceptions import ConfigError

logger = logging.getLogger(__name__)

# Type aliases for better readability
StatusText = str
StateDigest = str
OutputFormat = Literal['json', 'csv']
CheckName = Literal['lamperti', 'fearn', 'dominance', 'shift-invariance', 'time-invariance']

SCHEMA_VERSION = 1


@dataclass
class Estimate:
    """A binomial Monte-Carlo estimate with a clamped normal-approximation interval."""
    label: str
    point: float
    stderr: float
    n: int
    successes: int
    ci: Tuple[float, float]
    z: float
    seed: int
    skipped: int = 0
    inconclusive: bool = False
    notes: List[str] = field(default_factory=list)

    @classmethod
    def binomial(cls, successes: int, n: int, z: float, seed: int, label: str = "",
                 skipped: int = 0) -> Estimate:
        """Point, standard error sqrt(p(1-p)/n) and CI point -/+ z*SE clamped to [0, 1]."""
        if n <= 0:
            return cls(label, math.nan, math.nan, 0, 0, (0.0, 1.0), z, seed, skipped, True,
                       ["no completed samples"])
        p = successes / n
        se = math.sqrt(p * (1.0 - p) / n)
        lo, hi = max(0.0, p - z * se), min(1.0, p + z * se)
        return cls(label, p, se, n, int(successes), (lo, hi), z, seed, skipped)

    @property
    def skip_rate(self) -> float:
        total = self.n + self.skipped
        return self.skipped / total if total else 0.0

    def agrees_with(self, value: float, floor: float = 0.0) -> bool:
        """|point - value| <= max(floor, z * SE)."""
        return abs(self.point - value) <= max(floor, self.z * self.stderr)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['ci'] = list(self.ci)
        data['skip_rate'] = self.skip_rate
        return data


@dataclass
class Episode:
    """The trace of one controlled run over a (lazily) sampled tree."""
    seed: int
    strategy: str
    path: Tuple[int, ...]
    digests: List[StateDigest]
    flags: List[List[str]]
    available_counts: List[int]
    state_sizes: List[int]
    status: StatusText
    window: Optional[int] = None
    states: List[Any] = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.path)

    def has_flag(self, stage: int, flag: str) -> bool:
        return flag in self.flags[stage]

    def to_dict(self) -> Dict[str, Any]:
        """Dictionary form without the in-memory states."""
        return {
            'seed': self.seed,
            'strategy': self.strategy,
            'path': list(self.path),
            'digests': list(self.digests),
            'flags': [list(f) for f in self.flags],
            'available_counts': list(self.available_counts),
            'state_sizes': list(self.state_sizes),
            'status': self.status,
            'window': self.window,
        }


@dataclass
class ShiftValueSequence:
    """s_t estimates for t = 0..T together with the recursion residuals g_t(s_{t+1}) - s_t."""
    goal: str
    values: List[float]
    stderrs: List[float]
    exact: List[Optional[float]] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    recursion_ok: List[bool] = field(default_factory=list)
    exact_ok: List[bool] = field(default_factory=list)
    monotone_ok: bool = True

    @property
    def passed(self) -> bool:
        return all(self.recursion_ok) and all(self.exact_ok) and self.monotone_ok

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['passed'] = self.passed
        return data


@dataclass
class CheckResult:
    """One named assertion within a report."""
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    label: str = ""
    inconclusive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> CheckResult:
        filtered_data = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**filtered_data)


@dataclass
class ExperimentConfig:
    """A validated experiment document. Unknown keys are rejected; `seed` is mandatory."""
    seed: int
    schema_version: int = SCHEMA_VERSION
    family: Any = None
    goal: Any = None
    strategies: List[Any] = field(default_factory=list)
    horizons: List[int] = field(default_factory=list)
    window: int = 0
    samples: int = 1000
    t0: int = 0
    output: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, Any] = field(default_factory=dict)
    tree: Dict[str, Any] = field(default_factory=dict)
    omniscient: Dict[str, Any] = field(default_factory=dict)
    mdp: Dict[str, Any] = field(default_factory=dict)
    mbp: Dict[str, Any] = field(default_factory=dict)
    bpve: Dict[str, Any] = field(default_factory=dict)
    check: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ExperimentConfig:
        """
        Validates and builds an ExperimentConfig.

        Raises:
            ConfigError: on unknown keys, a missing seed, a wrong schema
                version or a wrongly typed field.
        """
        if not isinstance(data, dict):
            raise ConfigError(f"An experiment config must be a mapping, got {type(data).__name__}.")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        if data.get('seed') is None:
            raise ConfigError("The experiment config must set 'seed'.")
        version = data.get('schema_version', SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported schema_version {version}; expected {SCHEMA_VERSION}.")
        config = cls(**data)
        config._validate()
        return config

    def _validate(self) -> None:
        for name in ('seed', 'window', 'samples', 't0'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{name}' must be an integer, got {value!r}.")
        if self.samples < 1:
            raise ConfigError(f"'samples' must be positive, got {self.samples}.")
        if self.window < 0 or self.t0 < 0:
            raise ConfigError("'window' and 't0' must be non-negative.")
        if not isinstance(self.strategies, list) or not isinstance(self.horizons, list):
            raise ConfigError("'strategies' and 'horizons' must be lists.")
        if any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in self.horizons):
            raise ConfigError(f"'horizons' must hold positive integers, got {self.horizons}.")
        for name in ('output', 'tolerances', 'tree', 'omniscient', 'mdp', 'mbp', 'bpve', 'check'):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"'{name}' must be a mapping.")

    def tolerance(self, key: str, default: Any) -> Any:
        return self.tolerances.get(key, default)

    def with_seed(self, seed: int) -> ExperimentConfig:
        data = self.to_dict()
        data['seed'] = int(seed)
        return ExperimentConfig.from_dict(data)
