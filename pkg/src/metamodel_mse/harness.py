"""Monte-Carlo MSE, sample-size sweeps and crossover detection.

Each (model, n) cell draws its replications from its own seed,
``combine(combine(mix64(base_seed), model_index + 1), n)``, where
``model_index`` is the model's position in ``fit.MODEL_NAMES``. With
``crn=True`` the model index is replaced by 0 so all models at a given n
see the same simulated data. Cells are farmed out to a thread pool, and
results are placed by cell, so the report does not depend on ``workers``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .analytic import INF, MseBreakdown, exact_linear_mse, nstar_exact
from .design import ConditionGrid, allocate_equal
from .errors import ConfigError, NumericalError
from .fit import MODEL_NAMES, BalancedFitter, ModelSpec, get_model, level_design
from .simulate import McEstimate, SeedSpec
from .truth import GroundTruth

DEFAULT_N_GRID = (100, 200, 300, 400, 500, 1000, 2000, 3000, 4000, 5000, 6000)
DEFAULT_REPS = 10_000


def cell_seed(base_seed: int, model_name: str, n: int, crn: bool = False) -> SeedSpec:
    model_index = 0 if crn else MODEL_NAMES.index(model_name) + 1
    return SeedSpec(kernels.combine(kernels.combine(kernels.mix64(base_seed), model_index), n), 0)


def replication_losses(
    model: ModelSpec,
    grid: ConditionGrid,
    truth: GroundTruth,
    n: int,
    reps: int,
    seed: SeedSpec,
    backend: str | None = None,
) -> np.ndarray:
    """Squared loss sum_l (yhat_l - mu_l)^2 for each of ``reps`` replications."""
    truth.check_grid(grid)
    alloc = allocate_equal(n, grid)
    fitter = BalancedFitter(level_design(model, grid))
    mu = truth.as_array()
    keys = kernels.stream_keys(seed.base_seed, seed.replication_index + np.arange(reps), grid.L)
    means = kernels.condition_means(keys, alloc.per_level, mu, math.sqrt(truth.sigma2), backend)
    losses = np.sum((fitter.predict(means) - mu) ** 2, axis=1)
    bad = np.flatnonzero(~np.isfinite(losses))
    if bad.size:
        rep = seed.replication_index + int(bad[0])
        raise NumericalError(f"{model.name} at n={n}: non-finite loss in replication {rep}")
    return losses


def mc_mse(
    model: ModelSpec,
    grid: ConditionGrid,
    truth: GroundTruth,
    n: int,
    reps: int,
    seed: SeedSpec,
    backend: str | None = None,
) -> McEstimate:
    if reps < 2:
        raise ConfigError(f"reps must be >= 2, got {reps}")
    return McEstimate.from_values(replication_losses(model, grid, truth, n, reps, seed, backend))


@dataclass(frozen=True)
class Cell:
    analytic: MseBreakdown
    mc: McEstimate


@dataclass(frozen=True)
class Crossover:
    model_a: str
    model_b: str
    nstar_exact: float
    interval_mc: tuple[int, int] | None
    interval_analytic: tuple[int, int] | None


@dataclass
class SweepReport:
    n_grid: tuple[int, ...]
    models: tuple[str, ...]
    p: dict[str, int]
    cells: dict[tuple[int, str], Cell]
    best_analytic: dict[int, str] = field(default_factory=dict)
    best_mc: dict[int, str] = field(default_factory=dict)
    crossovers: list[Crossover] = field(default_factory=list)
    reps: int = 0
    crn: bool = False

    def cell(self, n: int, model: str) -> Cell:
        return self.cells[(n, model)]


def _argmin(report: SweepReport, n: int, key) -> str:
    return min(report.models, key=lambda m: (key(report.cells[(n, m)]), report.p[m], m))


def _resolve_workers(workers: int | str | None) -> int:
    if workers in (None, "max"):
        return os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def run_sweep(
    models: Sequence[str | ModelSpec],
    grid: ConditionGrid,
    truth: GroundTruth,
    n_grid: Sequence[int],
    reps: int,
    seed: SeedSpec,
    workers: int | str | None = 1,
    crn: bool = False,
    backend: str | None = None,
) -> SweepReport:
    specs = [m if isinstance(m, ModelSpec) else get_model(m) for m in models]
    if not specs:
        raise ConfigError("at least one model is required")
    names = tuple(s.name for s in specs)
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate models in {list(names)}")
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if not n_grid:
        raise ConfigError("n_grid is empty")
    if len(set(n_grid)) != len(n_grid):
        raise ConfigError(f"duplicate sample sizes in n_grid {list(n_grid)}")
    if reps < 2:
        raise ConfigError(f"reps must be >= 2, got {reps}")
    truth.check_grid(grid)
    for n in n_grid:
        try:
            allocate_equal(n, grid)
        except ConfigError as exc:
            raise ConfigError(f"n_grid entry {n}: {exc}") from None
    p = {}
    analytic = {}
    for spec in specs:
        try:
            p[spec.name] = level_design(spec, grid).p
            for n in n_grid:
                analytic[(n, spec.name)] = exact_linear_mse(spec, grid, truth, n)
        except (ConfigError, NumericalError) as exc:
            raise type(exc)(f"model {spec.name}: {exc}") from None

    tasks = [(n, spec) for n in n_grid for spec in specs]

    def run_cell(task):
        n, spec = task
        try:
            return mc_mse(spec, grid, truth, n, reps, cell_seed(seed.base_seed, spec.name, n, crn), backend)
        except NumericalError as exc:
            raise NumericalError(f"cell (n={n}, model={spec.name}): {exc}") from None

    nworkers = min(_resolve_workers(workers), len(tasks))
    if nworkers == 1:
        results = [run_cell(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(run_cell, tasks))

    cells = {(n, spec.name): Cell(analytic[(n, spec.name)], mc) for (n, spec), mc in zip(tasks, results)}
    report = SweepReport(n_grid=n_grid, models=names, p=p, cells=cells, reps=reps, crn=crn)
    for n in n_grid:
        report.best_analytic[n] = _argmin(report, n, lambda c: c.analytic.total)
        report.best_mc[n] = _argmin(report, n, lambda c: c.mc.mean)
    if "direct" in names:
        for spec in specs:
            if spec.name == "direct" or p[spec.name] >= grid.L:
                continue
            report.crossovers.append(
                Crossover(
                    spec.name,
                    "direct",
                    nstar_exact(spec, grid, truth),
                    detect_crossover(report, spec.name, "direct", source="mc"),
                    detect_crossover(report, spec.name, "direct", source="analytic"),
                )
            )
    return report


def detect_crossover(
    report: SweepReport, model_a: str, model_b: str, source: str = "mc"
) -> tuple[int, int] | None:
    """First adjacent grid pair where the MSE ordering of two models flips.

    With ``source="mc"`` the gap at both endpoints must exceed twice the
    combined standard error; with ``source="analytic"`` it must be nonzero.
    """
    for name in (model_a, model_b):
        if name not in report.models:
            raise ConfigError(f"model {name!r} is not in the report ({', '.join(report.models)})")
    if source not in ("mc", "analytic"):
        raise ValueError(f"source must be 'mc' or 'analytic', got {source!r}")
    gaps = []
    for n in report.n_grid:
        a, b = report.cells[(n, model_a)], report.cells[(n, model_b)]
        if source == "mc":
            gaps.append((a.mc.mean - b.mc.mean, 2.0 * math.hypot(a.mc.stderr, b.mc.stderr)))
        else:
            gaps.append((a.analytic.total - b.analytic.total, 0.0))
    for i in range(len(gaps) - 1):
        (d0, t0), (d1, t1) = gaps[i], gaps[i + 1]
        if d0 * d1 < 0 and abs(d0) > t0 and abs(d1) > t1:
            return report.n_grid[i], report.n_grid[i + 1]
    return None


def best_model_ladder(report: SweepReport, source: str = "analytic") -> list[tuple[int, int, str]]:
    """Runs of consecutive grid points sharing a best model: (n_first, n_last, model)."""
    best = report.best_analytic if source == "analytic" else report.best_mc
    ladder: list[tuple[int, int, str]] = []
    for n in report.n_grid:
        if ladder and ladder[-1][2] == best[n]:
            ladder[-1] = (ladder[-1][0], n, best[n])
        else:
            ladder.append((n, n, best[n]))
    return ladder


def oracle_agreement(report: SweepReport, k: float = 4.0) -> tuple[int, int]:
    """Number of cells with |MC - exact| <= k * stderr, and the total cell count."""
    hits = sum(
        1 for c in report.cells.values() if abs(c.mc.mean - c.analytic.total) <= k * c.mc.stderr
    )
    return hits, len(report.cells)


def top_two_gap_resolved(report: SweepReport, n: int, k: float = 4.0) -> bool:
    """True when the two best analytic models differ by more than k combined stderr."""
    ranked = sorted(report.models, key=lambda m: (report.cells[(n, m)].analytic.total, report.p[m], m))
    if len(ranked) < 2:
        return True
    a, b = report.cells[(n, ranked[0])], report.cells[(n, ranked[1])]
    return (b.analytic.total - a.analytic.total) > k * math.hypot(a.mc.stderr, b.mc.stderr)


__all__ = [
    "DEFAULT_N_GRID",
    "DEFAULT_REPS",
    "INF",
    "Cell",
    "Crossover",
    "SweepReport",
    "best_model_ladder",
    "cell_seed",
    "detect_crossover",
    "mc_mse",
    "oracle_agreement",
    "replication_losses",
    "run_sweep",
    "top_two_gap_resolved",
]
