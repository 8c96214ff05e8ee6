"""Seeded Gaussian draws per condition: the stand-in for costly simulator runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .design import Allocation, ConditionGrid
from .errors import ConfigError
from .truth import GroundTruth

DEFAULT_SEED = 20240917
_U64_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int = DEFAULT_SEED
    replication_index: int = 0

    def __post_init__(self):
        if isinstance(self.base_seed, bool) or not isinstance(self.base_seed, (int, np.integer)):
            raise ConfigError(f"base_seed must be an integer, got {self.base_seed!r}")
        if not 0 <= int(self.base_seed) <= _U64_MAX:
            raise ConfigError(f"base_seed must fit in 64 unsigned bits, got {self.base_seed}")
        if int(self.replication_index) < 0:
            raise ConfigError("replication_index must be non-negative")
        object.__setattr__(self, "base_seed", int(self.base_seed))
        object.__setattr__(self, "replication_index", int(self.replication_index))

    def stream_key(self, condition_index: int) -> int:
        return kernels.stream_key(self.base_seed, self.replication_index, condition_index)


@dataclass(frozen=True)
class Dataset:
    grid: ConditionGrid
    allocation: Allocation
    samples: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.samples) != self.grid.L:
            raise ConfigError(f"dataset has {len(self.samples)} conditions, grid has {self.grid.L}")
        for k, (s, want) in enumerate(zip(self.samples, self.allocation.per_condition)):
            if len(s) != want:
                raise ConfigError(f"condition {k}: {len(s)} samples, allocation says {want}")

    @property
    def n(self) -> int:
        return sum(len(s) for s in self.samples)

    def condition_means(self) -> np.ndarray:
        return np.array([s.mean() for s in self.samples])


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo mean of per-replication values with its standard error."""

    mean: float
    stderr: float
    reps: int

    @classmethod
    def from_values(cls, values: np.ndarray) -> "McEstimate":
        values = np.asarray(values, dtype=np.float64)
        reps = values.shape[0]
        if reps < 2:
            raise ConfigError("a Monte-Carlo estimate needs reps >= 2")
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(reps)), int(reps))


def sample_condition(
    mean: float,
    sigma2: float,
    count: int,
    seed: SeedSpec,
    condition_index: int,
    backend: str | None = None,
) -> np.ndarray:
    if not sigma2 > 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2!r}")
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    z = kernels.standard_normals(seed.stream_key(condition_index), count, backend)
    return mean + math.sqrt(sigma2) * z


def generate_dataset(
    truth: GroundTruth,
    allocation: Allocation,
    seed: SeedSpec,
    grid: ConditionGrid | None = None,
    backend: str | None = None,
) -> Dataset:
    if truth.L != len(allocation.per_condition):
        raise ConfigError(
            f"truth has {truth.L} conditions but allocation covers {len(allocation.per_condition)}"
        )
    if grid is None:
        grid = allocation.grid
    if grid is None:
        raise ConfigError("allocation carries no grid; pass grid explicitly")
    if grid.L != truth.L:
        raise ConfigError(f"grid has L={grid.L} but truth has {truth.L} means")
    samples = tuple(
        sample_condition(mu, truth.sigma2, count, seed, k, backend)
        for k, (mu, count) in enumerate(zip(truth.means, allocation.per_condition))
    )
    return Dataset(grid=grid, allocation=allocation, samples=samples)
