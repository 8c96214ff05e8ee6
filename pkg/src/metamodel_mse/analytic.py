"""Closed-form MSE of direct and least-squares estimators under balanced allocation.

Two families live here. The ``exact_*`` functions use projection algebra in
condition space and hold for any linear basis. The ``*_paper`` functions
evaluate the published single-factor formulas verbatim, including their
constants; they disagree with the exact engine and are kept for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels
from .design import ConditionGrid, allocate_equal
from .errors import ConfigError
from .fit import BalancedFitter, LevelDesign, ModelSpec, PivotedQR, level_design
from .simulate import McEstimate, SeedSpec
from .truth import GroundTruth, grand_mean

# squared bias below (BIAS_RTOL * ||mu||)^2 is rounding noise and is reported as 0
BIAS_RTOL = 1e-9
# centred level sums below this fraction of their scale count as exactly zero
_RHO_RTOL = 1e-12

INF = math.inf


@dataclass(frozen=True)
class MseBreakdown:
    variance: float
    bias_sq: float
    total: float

    @classmethod
    def of(cls, variance: float, bias_sq: float) -> "MseBreakdown":
        return cls(float(variance), float(bias_sq), float(variance) + float(bias_sq))


def _check_balanced(L: int, n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n <= 0:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if n % L != 0:
        raise ConfigError(f"n must be divisible by L (n={n}, L={L})")


def modelfree_mse(L: int, sigma2: float, n: int) -> MseBreakdown:
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    if not sigma2 > 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2!r}")
    _check_balanced(L, n)
    return MseBreakdown.of(L * L * sigma2 / n, 0.0)


def _bias_sq(design: LevelDesign, mu: np.ndarray) -> float:
    solver = PivotedQR(design.Z, design.columns, design.model.name)
    Q = solver.Q
    resid = mu - Q @ (Q.T @ mu)
    bias = float(resid @ resid)
    if bias <= (BIAS_RTOL * float(np.linalg.norm(mu))) ** 2:
        return 0.0
    return bias


def _variance(design: LevelDesign, sigma2: float, per_level: int) -> float:
    # sigma2 * sum_l z_l' (X'X)^-1 z_l, with X'X = m Z'Z = m (R'R) in pivoted order
    solver = PivotedQR(design.Z, design.columns, design.model.name)
    W = scipy.linalg.solve_triangular(solver.R, design.Z[:, solver.perm].T, trans="T", lower=False)
    return sigma2 * float(np.sum(W * W)) / per_level


def exact_linear_mse(model: ModelSpec, grid: ConditionGrid, truth: GroundTruth, n: int) -> MseBreakdown:
    truth.check_grid(grid)
    alloc = allocate_equal(n, grid)
    design = level_design(model, grid)
    variance = _variance(design, truth.sigma2, alloc.per_level)
    return MseBreakdown.of(variance, _bias_sq(design, truth.as_array()))


def _centred_level_sum(level_means: Sequence[float]) -> tuple[int, float]:
    y = np.asarray(level_means, dtype=np.float64)
    L = y.shape[0]
    if L < 2:
        raise ConfigError(f"needs at least 2 levels, got L={L}")
    ybar = math.fsum(y) / L
    w = np.arange(1, L + 1) - (L + 1) / 2.0
    s = math.fsum(w * (y - ybar))
    scale = float(np.sum(np.abs(w))) * float(np.max(np.abs(y)))
    if abs(s) <= _RHO_RTOL * scale:
        s = 0.0
    return L, s


def rho_squared(level_means: Sequence[float]) -> float:
    """Squared between-group term: (sum (l - (L+1)/2)(y_l - ybar) / ((L^2-1)/12))^2."""
    L, s = _centred_level_sum(level_means)
    return (s / ((L * L - 1) / 12.0)) ** 2


def _printed_variance_ratio(L: int) -> float:
    # 2(L^2/3 + L/2 + 1/6) / ((1/12)(L^2 - 1))
    return 2.0 * (L * L / 3.0 + L / 2.0 + 1.0 / 6.0) / ((L * L - 1) / 12.0)


def theorem1_mse_paper(L: int, sigma2: float, n: int, level_means: Sequence[float]) -> float:
    """Single-factor linear-fit MSE from the printed closed form, constants kept verbatim."""
    if L < 2:
        raise ConfigError(f"the printed formula divides by L^2 - 1; needs L >= 2, got L={L}")
    if len(level_means) != L:
        raise ConfigError(f"expected {L} level means, got {len(level_means)}")
    _check_balanced(L, n)
    first = (L * sigma2 / n) * (_printed_variance_ratio(L) + 1.0)
    second = (2 * L * L + 3 * L + 1) / (6.0 * L) * rho_squared(level_means)
    return first + second


def appendix_variance_paper(L: int, sigma2: float, n: int) -> float:
    """Printed end-of-derivation variance: (s2/n) 2L(L^2/3+L/2+1/6) / (7L^2/12+L/2+1/6)."""
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    _check_balanced(L, n)
    num = 2.0 * L * (L * L / 3.0 + L / 2.0 + 1.0 / 6.0)
    den = 7.0 * L * L / 12.0 + L / 2.0 + 1.0 / 6.0
    return sigma2 / n * num / den


def nstar_paper(L: int, sigma2: float, level_means: Sequence[float]) -> float:
    """Crossover sample size as printed; ``inf`` when rho^2 is zero. May be negative."""
    if L < 2:
        raise ConfigError(f"needs L >= 2, got L={L}")
    if len(level_means) != L:
        raise ConfigError(f"expected {L} level means, got {len(level_means)}")
    rho2 = rho_squared(level_means)
    if rho2 == 0.0:
        return INF
    bracket = L - 1 - _printed_variance_ratio(L)
    return sigma2 * bracket * (6.0 * L * L / (2 * L * L + 3 * L + 1)) / rho2


def nstar_exact(model: ModelSpec, grid: ConditionGrid, truth: GroundTruth) -> float:
    """Budget n at which direct estimation and ``model`` have equal exact MSE.

    L^2 s2 / n = p L s2 / n + bias^2  gives  n* = L s2 (L - p) / bias^2.
    """
    truth.check_grid(grid)
    design = level_design(model, grid)
    L, p = design.L, design.p
    if p >= L:
        raise ConfigError(f"{model.name} has p={p} >= L={L}; direct estimation never wins on variance")
    bias = _bias_sq(design, truth.as_array())
    if bias == 0.0:
        return INF
    return L * truth.sigma2 * (L - p) / bias


def cov_grandmean_beta_check(
    model: ModelSpec,
    grid: ConditionGrid,
    truth: GroundTruth,
    n: int,
    reps: int,
    seed: SeedSpec,
    backend: str | None = None,
) -> McEstimate:
    """Monte-Carlo Cov(grand sample mean, fitted slope) for a one-factor linear fit.

    ``mean`` is the unbiased covariance estimate; ``stderr`` is the standard
    error of the mean of centred cross products.
    """
    if grid.num_factors != 1:
        raise ConfigError(f"the slope covariance check needs a one-factor grid, got {grid.num_factors}")
    design = level_design(model, grid)
    if design.p != 2:
        raise ConfigError(f"the slope covariance check needs a two-term line fit, {model.name} has p={design.p}")
    if reps < 2:
        raise ConfigError("reps must be >= 2")
    truth.check_grid(grid)
    alloc = allocate_equal(n, grid)
    keys = kernels.stream_keys(seed.base_seed, seed.replication_index + np.arange(reps), grid.L)
    means = kernels.condition_means(keys, alloc.per_level, truth.as_array(), math.sqrt(truth.sigma2), backend)
    grand = means.mean(axis=1)
    slope = BalancedFitter(design).coefficients(means)[:, 1]
    d = (grand - grand.mean()) * (slope - slope.mean())
    return McEstimate(float(d.sum() / (reps - 1)), float(d.std(ddof=1) / math.sqrt(reps)), int(reps))


def printed_vs_exact(grid: ConditionGrid, truth: GroundTruth, n: int, model: ModelSpec) -> dict[str, float]:
    """Side-by-side linear-fit MSE terms for a one-factor grid (reporting only)."""
    exact = exact_linear_mse(model, grid, truth, n)
    L = grid.L
    return {
        "variance_exact": exact.variance,
        "variance_theorem_printed": (L * truth.sigma2 / n) * (_printed_variance_ratio(L) + 1.0),
        "variance_appendix_printed": appendix_variance_paper(L, truth.sigma2, n),
        "total_exact": exact.total,
        "total_theorem_printed": theorem1_mse_paper(L, truth.sigma2, n, truth.means),
        "grand_mean": grand_mean(truth),
    }
