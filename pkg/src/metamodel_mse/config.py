"""Run configuration: YAML with ``grid``, ``truth``, ``models`` and ``run`` sections.

Example::

    grid:
      factors:
        - {name: x1, levels: 5}
        - {name: x2, levels: 5}
    truth:
      sigma2: 400.0
      preset: {base: 2400.0, slope1: -12.0, slope2: -4.0, curvature: 0.5}
      # or: means: [ ... L values in condition order ... ]
    models: [model1, model2, model3, model4, model5, direct]
    run:
      n_grid: [100, 200, 300, 400, 500, 1000, 2000, 3000, 4000, 5000, 6000]
      reps: 10000
      base_seed: 20240917
      workers: 1
      crn: false
      out: null
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .design import ConditionGrid, Factor, allocate_equal, build_grid
from .errors import ConfigError
from .fit import MODEL_NAMES, PivotedQR, get_model, level_design
from .harness import DEFAULT_N_GRID, DEFAULT_REPS
from .simulate import DEFAULT_SEED, SeedSpec
from .truth import GroundTruth, preset_oud_like, truth_from_means

PRESET_KEYS = ("base", "slope1", "slope2", "curvature")
_DEFAULT_PRESET = {"base": 2400.0, "slope1": -12.0, "slope2": -4.0, "curvature": 0.5}


@dataclass
class FactorConfig:
    name: str
    levels: int
    encoding: list[float] | None = None


@dataclass
class RunConfig:
    factors: list[FactorConfig] = field(
        default_factory=lambda: [FactorConfig("x1", 5), FactorConfig("x2", 5)]
    )
    sigma2: float = 400.0
    means: list[float] | None = None
    preset: dict[str, float] | None = field(default_factory=lambda: dict(_DEFAULT_PRESET))
    models: list[str] = field(default_factory=lambda: list(MODEL_NAMES))
    n_grid: list[int] = field(default_factory=lambda: list(DEFAULT_N_GRID))
    reps: int = DEFAULT_REPS
    base_seed: int = DEFAULT_SEED
    workers: int = 1
    crn: bool = False
    out: str | None = None

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        factors = []
        for f in self.factors:
            d = {"name": f.name, "levels": f.levels}
            if f.encoding is not None:
                d["encoding"] = list(f.encoding)
            factors.append(d)
        truth: dict[str, Any] = {"sigma2": self.sigma2}
        if self.means is not None:
            truth["means"] = list(self.means)
        if self.preset is not None:
            truth["preset"] = dict(self.preset)
        return {
            "grid": {"factors": factors},
            "truth": truth,
            "models": list(self.models),
            "run": {
                "n_grid": list(self.n_grid),
                "reps": self.reps,
                "base_seed": self.base_seed,
                "workers": self.workers,
                "crn": self.crn,
                "out": self.out,
            },
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping with grid/truth/models/run sections")
        unknown = set(data) - {"grid", "truth", "models", "run"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        cfg = cls()
        grid = _section(data, "grid")
        if "factors" in grid:
            raw = grid["factors"]
            if not isinstance(raw, list) or not raw:
                raise ConfigError("grid.factors: expected a non-empty list")
            factors = []
            for k, f in enumerate(raw):
                if not isinstance(f, dict) or "levels" not in f:
                    raise ConfigError(f"grid.factors[{k}]: expected a mapping with 'levels'")
                enc = f.get("encoding")
                factors.append(
                    FactorConfig(
                        str(f.get("name", f"x{k + 1}")),
                        _as_int(f["levels"], f"grid.factors[{k}].levels"),
                        None if enc is None else [_as_float(v, f"grid.factors[{k}].encoding") for v in enc],
                    )
                )
            cfg.factors = factors
        truth = _section(data, "truth")
        if "sigma2" in truth:
            cfg.sigma2 = _as_float(truth["sigma2"], "truth.sigma2")
        if "means" in truth or "preset" in truth:
            cfg.means = None
            cfg.preset = None
        if truth.get("means") is not None:
            cfg.means = [_as_float(v, "truth.means") for v in truth["means"]]
        if truth.get("preset") is not None:
            preset = truth["preset"]
            if not isinstance(preset, dict):
                raise ConfigError("truth.preset: expected a mapping")
            bad = set(preset) - set(PRESET_KEYS)
            if bad:
                raise ConfigError(f"truth.preset: unknown key(s) {', '.join(sorted(bad))}")
            cfg.preset = {k: _as_float(preset.get(k, _DEFAULT_PRESET[k]), f"truth.preset.{k}") for k in PRESET_KEYS}
        if "models" in data:
            models = data["models"]
            if not isinstance(models, list):
                raise ConfigError("models: expected a list of model names")
            cfg.models = [str(m) for m in models]
        run = _section(data, "run")
        unknown = set(run) - {"n_grid", "reps", "base_seed", "workers", "crn", "out"}
        if unknown:
            raise ConfigError(f"run: unknown key(s) {', '.join(sorted(unknown))}")
        if "n_grid" in run:
            if not isinstance(run["n_grid"], list):
                raise ConfigError("run.n_grid: expected a list of sample sizes")
            cfg.n_grid = [_as_int(v, "run.n_grid") for v in run["n_grid"]]
        if "reps" in run:
            cfg.reps = _as_int(run["reps"], "run.reps")
        if "base_seed" in run:
            cfg.base_seed = _as_int(run["base_seed"], "run.base_seed")
        if "workers" in run:
            cfg.workers = _as_int(run["workers"], "run.workers")
        if "crn" in run:
            if not isinstance(run["crn"], bool):
                raise ConfigError("run.crn: expected true or false")
            cfg.crn = run["crn"]
        if "out" in run:
            cfg.out = None if run["out"] is None else str(run["out"])
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.loads(text)

    def with_override(self, dotted: str, raw_value: str) -> "RunConfig":
        """Return a copy with ``section.key`` (e.g. ``truth.sigma2``) replaced."""
        data = self.to_dict()
        parts = dotted.split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = yaml.safe_load(raw_value)
        if dotted in ("truth.means",):
            data["truth"].pop("preset", None)
        if dotted.startswith("truth.preset"):
            data["truth"].pop("means", None)
        return RunConfig.from_dict(data)

    # -- binding -------------------------------------------------------------

    def build_grid(self) -> ConditionGrid:
        try:
            return build_grid([Factor(f.name, f.levels, tuple(f.encoding or ())) for f in self.factors])
        except ConfigError as exc:
            raise ConfigError(f"grid: {exc}") from None

    def build_truth(self, grid: ConditionGrid | None = None) -> GroundTruth:
        grid = grid or self.build_grid()
        if (self.means is None) == (self.preset is None):
            raise ConfigError("truth: give exactly one of 'means' or 'preset'")
        try:
            if self.means is not None:
                return truth_from_means(grid, self.means, self.sigma2)
            return preset_oud_like(grid, sigma2=self.sigma2, **self.preset)
        except ConfigError as exc:
            raise ConfigError(f"truth: {exc}") from None

    def seed(self) -> SeedSpec:
        try:
            return SeedSpec(self.base_seed, 0)
        except ConfigError as exc:
            raise ConfigError(f"run.base_seed: {exc}") from None

    def validate(self) -> tuple[ConditionGrid, GroundTruth]:
        """Check every field before any computation; returns the bound grid and truth.

        Raises ConfigError (bad input) or RankDeficientError (a model the grid
        cannot identify).
        """
        grid = self.build_grid()
        truth = self.build_truth(grid)
        if not self.models:
            raise ConfigError("models: at least one model is required")
        if len(set(self.models)) != len(self.models):
            raise ConfigError(f"models: duplicates in {self.models}")
        for name in self.models:
            try:
                design = level_design(get_model(name), grid)
            except ConfigError as exc:
                raise ConfigError(f"models: {exc}") from None
            PivotedQR(design.Z, design.columns, name)
        if not self.n_grid:
            raise ConfigError("run.n_grid: empty")
        for n in self.n_grid:
            try:
                allocate_equal(n, grid)
            except ConfigError as exc:
                raise ConfigError(f"run.n_grid: {exc}") from None
        if self.reps < 2:
            raise ConfigError(f"run.reps: must be >= 2, got {self.reps}")
        if self.workers < 1:
            raise ConfigError(f"run.workers: must be >= 1, got {self.workers}")
        self.seed()
        return grid, truth

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return value


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


__all__ = ["FactorConfig", "RunConfig", "PRESET_KEYS"]
