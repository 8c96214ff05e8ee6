"""Factors, condition grids and balanced allocation.

Conditions are ordered lexicographically by level index with the first
factor varying slowest, so ``conditions[k]`` is stable across runs and
row ``k`` of every per-condition array refers to the same treatment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class Factor:
    """One intervention factor. ``encoding`` defaults to 1, 2, ..., num_levels."""

    name: str
    num_levels: int
    encoding: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not isinstance(self.num_levels, int) or self.num_levels < 2:
            raise ConfigError(
                f"factor {self.name!r}: num_levels must be an integer >= 2, got {self.num_levels!r}"
            )
        enc = self.encoding
        if len(enc) == 0:
            enc = tuple(float(k) for k in range(1, self.num_levels + 1))
        else:
            enc = tuple(float(v) for v in enc)
        if len(enc) != self.num_levels:
            raise ConfigError(
                f"factor {self.name!r}: encoding has {len(enc)} entries, expected {self.num_levels}"
            )
        if any(not math.isfinite(v) for v in enc):
            raise ConfigError(f"factor {self.name!r}: encoding values must be finite")
        if any(b <= a for a, b in zip(enc, enc[1:])):
            raise ConfigError(f"factor {self.name!r}: encoding must be strictly increasing, got {list(enc)}")
        object.__setattr__(self, "encoding", enc)

    @property
    def has_default_encoding(self) -> bool:
        return self.encoding == tuple(float(k) for k in range(1, self.num_levels + 1))


@dataclass(frozen=True)
class ConditionGrid:
    factors: tuple[Factor, ...]
    conditions: tuple[tuple[float, ...], ...]

    @property
    def L(self) -> int:
        return len(self.conditions)

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    def level_indices(self) -> list[tuple[int, ...]]:
        """1-based level index tuples, in condition order."""
        return list(itertools.product(*(range(1, f.num_levels + 1) for f in self.factors)))


@dataclass(frozen=True)
class Allocation:
    n: int
    per_condition: tuple[int, ...]
    grid: ConditionGrid | None = field(default=None, compare=False, repr=False)

    @property
    def per_level(self) -> int:
        return self.per_condition[0]


def build_grid(factors: Sequence[Factor]) -> ConditionGrid:
    factors = tuple(factors)
    if not factors:
        raise ConfigError("a condition grid needs at least one factor")
    for f in factors:
        if not isinstance(f, Factor):
            raise ConfigError(f"expected Factor, got {type(f).__name__}")
    names = [f.name for f in factors]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate factor names: {names}")
    conditions = tuple(itertools.product(*(f.encoding for f in factors)))
    return ConditionGrid(factors=factors, conditions=conditions)


def allocate_equal(n: int, grid: ConditionGrid) -> Allocation:
    """Split ``n`` runs evenly over the grid; ``n`` must be a multiple of L."""
    if isinstance(n, bool) or not isinstance(n, int) or n <= 0:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    L = grid.L
    if n % L != 0:
        raise ConfigError(f"n must be divisible by L (n={n}, L={L})")
    return Allocation(n=n, per_condition=(n // L,) * L, grid=grid)
