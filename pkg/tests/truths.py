"""Ground truths constructed for the test suite."""

from __future__ import annotations

import numpy as np

from metamodel_mse.design import Factor, build_grid
from metamodel_mse.truth import GroundTruth

# Bias drop contributed by each step along model1 -> model2 -> ... -> model5 -> direct,
# for sigma2 = 100 on the 5x5 grid. Consecutive crossovers land at
# n = 150, 350, 800, 1500 and 4500.
LADDER_SIGMA2 = 100.0
LADDER_DROPS = {
    "x2": 2 * 25 * 100 / 150,   # model1 -> model2 (dp = 2)
    "x1^2": 25 * 100 / 350,     # model2 -> model3
    "x2^2": 25 * 100 / 800,     # model3 -> model4
    "x1^3": 25 * 100 / 1500,    # model4 -> model5
    "rest": 18 * 25 * 100 / 4500,  # model5 -> direct (dp = 18)
}


def grid_5x5():
    return build_grid([Factor("x1", 5), Factor("x2", 5)])


def grid_1d(L=5):
    return build_grid([Factor("x1", L)])


def ladder_truth(base: float = 2000.0) -> GroundTruth:
    """Truth whose squared bias falls by LADDER_DROPS along the nested bases."""
    grid = grid_5x5()
    x1 = np.array([c[0] for c in grid.conditions])
    x2 = np.array([c[1] for c in grid.conditions])
    cols = [np.ones(25), x1, x2, x1 * x2, x1**2, x2**2, x1**3, x1**2 * x2**2]
    Q, _ = np.linalg.qr(np.column_stack(cols))
    mu = base + (
        np.sqrt(LADDER_DROPS["x2"]) * Q[:, 2]
        + np.sqrt(LADDER_DROPS["x1^2"]) * Q[:, 4]
        + np.sqrt(LADDER_DROPS["x2^2"]) * Q[:, 5]
        + np.sqrt(LADDER_DROPS["x1^3"]) * Q[:, 6]
        + np.sqrt(LADDER_DROPS["rest"]) * Q[:, 7]
    )
    return GroundTruth(tuple(mu), LADDER_SIGMA2)


def linear_truth(sigma2: float = 100.0) -> GroundTruth:
    grid = grid_5x5()
    return GroundTruth(tuple(2400.0 - 12.0 * a - 4.0 * b for a, b in grid.conditions), sigma2)


def bump_truth(height: float = 1.0, sigma2: float = 100.0) -> GroundTruth:
    return GroundTruth((0.0, 0.0, height, 0.0, 0.0), sigma2)
