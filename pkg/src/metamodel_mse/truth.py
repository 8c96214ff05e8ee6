"""Ground-truth condition means and the shared within-condition variance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .design import ConditionGrid
from .errors import ConfigError


@dataclass(frozen=True)
class GroundTruth:
    means: tuple[float, ...]
    sigma2: float

    def __post_init__(self):
        means = tuple(float(v) for v in self.means)
        if not means:
            raise ConfigError("ground truth needs at least one mean")
        if any(not math.isfinite(v) for v in means):
            raise ConfigError("ground-truth means must be finite")
        sigma2 = float(self.sigma2)
        if not (math.isfinite(sigma2) and sigma2 > 0):
            raise ConfigError(f"sigma2 must be positive and finite, got {self.sigma2!r}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def L(self) -> int:
        return len(self.means)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.means, dtype=np.float64)

    def check_grid(self, grid: ConditionGrid) -> None:
        if self.L != grid.L:
            raise ConfigError(f"ground truth has {self.L} means but the grid has L={grid.L} conditions")


def truth_from_means(grid: ConditionGrid, means: Sequence[float], sigma2: float) -> GroundTruth:
    truth = GroundTruth(tuple(means), sigma2)
    truth.check_grid(grid)
    return truth


def grand_mean(truth: GroundTruth) -> float:
    return math.fsum(truth.means) / truth.L


def preset_oud_like(
    grid: ConditionGrid,
    base: float = 2400.0,
    slope1: float = -12.0,
    slope2: float = -4.0,
    curvature: float = 0.5,
    sigma2: float = 400.0,
) -> GroundTruth:
    """Smooth two-factor response surface ``base + s1*x1 + s2*x2 + c*x1**2``.

    A synthetic stand-in at the scale of county-level yearly death counts.
    The defaults are arbitrary, not calibrated to any data.
    """
    if grid.num_factors != 2:
        raise ConfigError(f"preset_oud_like needs a two-factor grid, got {grid.num_factors} factor(s)")
    if not all(f.has_default_encoding for f in grid.factors):
        raise ConfigError("preset_oud_like needs the default 1..L encoding on both factors")
    means = [base + slope1 * x1 + slope2 * x2 + curvature * x1 * x1 for x1, x2 in grid.conditions]
    return GroundTruth(tuple(means), sigma2)
