"""Exception hierarchy; the CLI maps each family to an exit code."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid user input: grids, truths, allocations, model bindings."""


class NumericalError(RuntimeError):
    """A fit or solve could not be carried out."""


class RankDeficientError(NumericalError):
    def __init__(self, model: str, dependent: list[str], rank: int, p: int):
        self.model = model
        self.dependent = list(dependent)
        self.rank = rank
        self.p = p
        super().__init__(
            f"design for {model!r} is rank deficient (rank {rank} < p={p}); "
            f"linearly dependent basis terms: {', '.join(self.dependent)}"
        )


class InsufficientDataError(NumericalError):
    pass
