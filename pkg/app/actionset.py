# app/actionset.py
"""
The `ActionSet` value type: a non-empty finite set of natural numbers.

Sets are stored as sorted, disjoint, non-adjacent half-open runs so that the
very large contiguous sets of the built-in families cost O(runs) rather than
O(elements). The text form joins runs with commas, e.g. `0..24,30`.
"""
from __future__ import annotations

import bisect
from typing import Iterable, Iterator, Sequence

import numpy as np

from app.exceptions import DistributionError, TreeFormatError


class ActionSet:
    """Immutable, hashable, non-empty finite subset of the naturals."""

    __slots__ = ("_runs", "_starts", "_cum", "_hash")

    def __init__(self, runs: Sequence[tuple[int, int]]):
        merged: list[tuple[int, int]] = []
        for lo, hi in sorted((int(lo), int(hi)) for lo, hi in runs if hi > lo):
            if lo < 0:
                raise DistributionError(f"Actions must be natural numbers, got run starting at {lo}.")
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        if not merged:
            raise DistributionError("An action set must be non-empty.")
        self._runs = tuple(merged)
        self._starts = [lo for lo, _ in merged]
        cum = [0]
        for lo, hi in merged:
            cum.append(cum[-1] + hi - lo)
        self._cum = cum
        self._hash = hash(self._runs)

    # --- Constructors ---
    @classmethod
    def of(cls, elements: Iterable[int]) -> ActionSet:
        values = sorted(set(int(e) for e in elements))
        runs: list[tuple[int, int]] = []
        for v in values:
            if runs and runs[-1][1] == v:
                runs[-1] = (runs[-1][0], v + 1)
            else:
                runs.append((v, v + 1))
        return cls(runs)

    @classmethod
    def interval(cls, lo: int, hi: int) -> ActionSet:
        """The set {lo, ..., hi} (both ends inclusive)."""
        return cls([(lo, hi + 1)])

    @classmethod
    def singleton(cls, a: int) -> ActionSet:
        return cls([(a, a + 1)])

    @classmethod
    def parse(cls, text: str) -> ActionSet:
        """Parses the `0..24,30` text form."""
        runs = []
        try:
            for token in text.strip().split(","):
                token = token.strip()
                if ".." in token:
                    lo, hi = token.split("..", 1)
                    runs.append((int(lo), int(hi) + 1))
                else:
                    runs.append((int(token), int(token) + 1))
        except ValueError as e:
            raise TreeFormatError(f"Malformed action set '{text}'.") from e
        return cls(runs)

    # --- Set protocol ---
    @property
    def runs(self) -> tuple[tuple[int, int], ...]:
        return self._runs

    def __len__(self) -> int:
        return self._cum[-1]

    def __iter__(self) -> Iterator[int]:
        for lo, hi in self._runs:
            yield from range(lo, hi)

    def __contains__(self, a: object) -> bool:
        if not isinstance(a, (int, np.integer)):
            return False
        i = bisect.bisect_right(self._starts, int(a)) - 1
        return i >= 0 and int(a) < self._runs[i][1]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ActionSet) and self._runs == other._runs

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"ActionSet({self})"

    def __str__(self) -> str:
        parts = []
        for lo, hi in self._runs:
            parts.append(str(lo) if hi - lo == 1 else f"{lo}..{hi - 1}")
        return ",".join(parts)

    def min(self) -> int:
        return self._runs[0][0]

    def max(self) -> int:
        return self._runs[-1][1] - 1

    def element_at(self, index: int) -> int:
        """The `index`-th smallest element."""
        if not 0 <= index < len(self):
            raise IndexError(index)
        i = bisect.bisect_right(self._cum, index) - 1
        return self._runs[i][0] + index - self._cum[i]

    def index_of(self, a: int) -> int:
        """Rank of `a` within the set; inverse of `element_at`."""
        i = bisect.bisect_right(self._starts, int(a)) - 1
        if i < 0 or int(a) >= self._runs[i][1]:
            raise KeyError(a)
        return self._cum[i] + int(a) - self._runs[i][0]

    def count_at_least(self, threshold: int) -> int:
        """Number of elements >= threshold."""
        total = 0
        for lo, hi in self._runs:
            if hi > threshold:
                total += hi - max(lo, threshold)
        return total

    def nonzero_count(self) -> int:
        return len(self) - (1 if 0 in self else 0)

    def to_array(self) -> np.ndarray:
        """Elements as a uint64 array (intended for vectorised hashing)."""
        return np.concatenate([np.arange(lo, hi, dtype=np.uint64) for lo, hi in self._runs])
