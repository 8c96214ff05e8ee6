"""Direct (sample-mean) and OLS metamodel estimators of condition means.

Built-in bases, on raw covariates x1 (first factor) and x2 (second):

    model1  1, x1
    model2  1, x1, x2, x1*x2
    model3  model2 + x1^2
    model4  model3 + x2^2
    model5  model4 + x1^3
    direct  one indicator per condition (cell-means coding, p = L)

Least squares goes through a column-pivoted QR; a column whose pivot falls
below ``RANK_RTOL`` times the leading pivot is reported as dependent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .design import ConditionGrid
from .errors import ConfigError, InsufficientDataError, RankDeficientError
from .simulate import Dataset
from .truth import GroundTruth

RANK_RTOL = 1e-10

Term = tuple[tuple[int, int], ...]  # ((factor_index, power), ...); () is the intercept


def _term_name(term: Term) -> str:
    if not term:
        return "1"
    parts = []
    for idx, power in term:
        parts.append(f"x{idx + 1}" + (f"^{power}" if power > 1 else ""))
    return "*".join(parts)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    terms: tuple[Term, ...] = ()
    saturated: bool = False

    @property
    def p(self) -> int | None:
        """Feature count; None for the saturated basis (p = L once bound)."""
        return None if self.saturated else len(self.terms)

    @property
    def factors_used(self) -> int:
        return max((idx + 1 for term in self.terms for idx, _ in term), default=0)

    def term_names(self) -> list[str]:
        return [_term_name(t) for t in self.terms]

    def feature_map(self, covariates: Sequence[float]) -> np.ndarray:
        if self.saturated:
            raise ConfigError("the saturated basis needs a grid; use level_design(model, grid)")
        x = [float(v) for v in covariates]
        if len(x) < self.factors_used:
            raise ConfigError(f"{self.name} uses {self.factors_used} factor(s); got {len(x)} covariate(s)")
        out = np.empty(len(self.terms))
        for j, term in enumerate(self.terms):
            v = 1.0
            for idx, power in term:
                v *= x[idx] ** power
            out[j] = v
        return out


_X1 = ((0, 1),)
_X2 = ((1, 1),)
_MODEL1 = ((), _X1)
_MODEL2 = _MODEL1 + (_X2, ((0, 1), (1, 1)))
_MODEL3 = _MODEL2 + (((0, 2),),)
_MODEL4 = _MODEL3 + (((1, 2),),)
_MODEL5 = _MODEL4 + (((0, 3),),)

BUILTIN_MODELS: dict[str, ModelSpec] = {
    "model1": ModelSpec("model1", _MODEL1),
    "model2": ModelSpec("model2", _MODEL2),
    "model3": ModelSpec("model3", _MODEL3),
    "model4": ModelSpec("model4", _MODEL4),
    "model5": ModelSpec("model5", _MODEL5),
    "direct": ModelSpec("direct", saturated=True),
}
MODEL_NAMES = tuple(BUILTIN_MODELS)


def get_model(name: str) -> ModelSpec:
    try:
        return BUILTIN_MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None


@dataclass(frozen=True)
class LevelDesign:
    """Condition-level design matrix Z (L x p), one row per condition."""

    model: ModelSpec
    grid: ConditionGrid
    Z: np.ndarray
    columns: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    @property
    def L(self) -> int:
        return self.Z.shape[0]

    def full_design(self, per_condition: Sequence[int]) -> np.ndarray:
        """Sample-level design X: row block k repeats Z[k] per_condition[k] times."""
        return np.repeat(self.Z, np.asarray(per_condition, dtype=np.intp), axis=0)


def level_design(model: ModelSpec, grid: ConditionGrid) -> LevelDesign:
    """Bind a model to a grid. Fails if the model needs factors the grid lacks."""
    if model.saturated:
        Z = np.eye(grid.L)
        columns = tuple(f"cond{k}" for k in range(grid.L))
    else:
        if model.factors_used > grid.num_factors:
            raise ConfigError(
                f"{model.name} uses factor x{model.factors_used} but the grid has "
                f"{grid.num_factors} factor(s)"
            )
        Z = np.array([model.feature_map(c) for c in grid.conditions])
        columns = tuple(model.term_names())
    Z.setflags(write=False)
    return LevelDesign(model=model, grid=grid, Z=Z, columns=columns)


class PivotedQR:
    """Least-squares solver for a fixed design with many right-hand sides."""

    def __init__(self, X: np.ndarray, columns: Sequence[str], model_name: str):
        n, p = X.shape
        if n < p:
            raise InsufficientDataError(f"{model_name}: {n} samples cannot identify p={p} coefficients")
        Q, R, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_RTOL * diag[0])) if p and diag[0] > 0 else 0
        if rank < p:
            dependent = [columns[j] for j in perm[rank:]]
            raise RankDeficientError(model_name, dependent, rank, p)
        self.Q = Q
        self.R = R
        self.perm = perm
        self.p = p

    def solve(self, Y: np.ndarray) -> np.ndarray:
        """Coefficients for Y of shape (n,) or (n, k); returns (p,) or (p, k)."""
        rhs = self.Q.T @ Y
        beta_perm = scipy.linalg.solve_triangular(self.R, rhs, lower=False)
        beta = np.empty_like(beta_perm)
        beta[self.perm] = beta_perm
        return beta


@dataclass(frozen=True)
class FitResult:
    model: ModelSpec
    coefficients: np.ndarray
    predicted_means: np.ndarray
    rss: float


def fit_ols(dataset: Dataset, model: ModelSpec) -> FitResult:
    """Ordinary least squares on every individual sample."""
    design = level_design(model, dataset.grid)
    X = design.full_design(dataset.allocation.per_condition)
    y = np.concatenate(dataset.samples)
    solver = PivotedQR(X, design.columns, model.name)
    beta = solver.solve(y)
    resid = y - X @ beta
    return FitResult(model, beta, design.Z @ beta, float(resid @ resid))


def direct_estimate(dataset: Dataset) -> FitResult:
    for k, s in enumerate(dataset.samples):
        if len(s) == 0:
            raise InsufficientDataError(f"condition {k} has no samples")
    means = dataset.condition_means()
    rss = float(sum(((s - m) ** 2).sum() for s, m in zip(dataset.samples, means)))
    return FitResult(BUILTIN_MODELS["direct"], means.copy(), means, rss)


class BalancedFitter:
    """Batch OLS for balanced data, from condition sample means alone.

    With m samples in every condition, X'X = m Z'Z and X'y = m Z'ybar, so
    the sample-level normal equations reduce to least squares of the
    condition means on Z. Used by the Monte-Carlo harness, where refitting
    the full n-row design for every replication would dominate runtime.
    """

    def __init__(self, design: LevelDesign):
        self.design = design
        self.solver = PivotedQR(design.Z, design.columns, design.model.name)

    def coefficients(self, means: np.ndarray) -> np.ndarray:
        """``means`` (R, L) -> coefficients (R, p)."""
        return self.solver.solve(np.asarray(means).T).T

    def predict(self, means: np.ndarray) -> np.ndarray:
        return self.coefficients(means) @ self.design.Z.T


def empirical_sq_loss(predicted: Sequence[float], truth: GroundTruth) -> float:
    pred = np.asarray(predicted, dtype=np.float64)
    if pred.shape != (truth.L,):
        raise ConfigError(f"predicted has shape {pred.shape}, truth has {truth.L} conditions")
    return math.fsum((pred - truth.as_array()) ** 2)
