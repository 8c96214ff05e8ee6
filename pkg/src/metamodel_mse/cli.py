"""Command-line front end: ``metamodel-mse {sweep,analytic,nstar,verify}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Sequence

from . import analytic
from .config import RunConfig
from .errors import ConfigError, NumericalError
from .fit import get_model, level_design
from .harness import best_model_ladder, oracle_agreement, run_sweep
from .verify import FAIL, all_passed, one_factor_view, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

SWEEP_HEADER = ["n", "model", "p", "mse_analytic", "variance", "bias_sq", "mse_mc", "mc_stderr", "best_analytic", "best_mc"]
ANALYTIC_HEADER = ["source", "quantity", "model", "n", "value"]
NSTAR_HEADER = ["model", "p", "bias_sq", "nstar_exact", "nstar_paper"]


def fmt(x) -> str:
    """Render a number for CSV: ints verbatim, floats at 10 significant digits.

    Python's float formatting rounds the exact binary value half-to-even, so
    the text is identical on every IEEE-754 platform.
    """
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".10g")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(path: str | Path, text: str) -> None:
    Path(path).write_text(text, newline="")


def sweep_rows(report) -> list[list]:
    rows = []
    for n in report.n_grid:
        for m in report.models:
            c = report.cells[(n, m)]
            rows.append([n, m, report.p[m], c.analytic.total, c.analytic.variance, c.analytic.bias_sq,
                         c.mc.mean, c.mc.stderr, report.best_analytic[n], report.best_mc[n]])
    return rows


def analytic_rows(cfg: RunConfig, grid, truth) -> list[list]:
    rows = []
    L = grid.L
    for name in cfg.models:
        spec = get_model(name)
        for n in cfg.n_grid:
            b = analytic.exact_linear_mse(spec, grid, truth, n)
            rows.append(["exact", "variance", name, n, b.variance])
            rows.append(["exact", "bias_sq", name, n, b.bias_sq])
            rows.append(["exact", "total", name, n, b.total])
    for n in cfg.n_grid:
        rows.append(["exact", "modelfree_mse", "direct", n, analytic.modelfree_mse(L, truth.sigma2, n).total])
    one_factor = grid.num_factors == 1 and grid.factors[0].has_default_encoding
    for n in cfg.n_grid:
        rows.append(["paper_as_printed", "theorem1_mse", "model1", n,
                     analytic.theorem1_mse_paper(L, truth.sigma2, n, truth.means) if one_factor else "n/a"])
        rows.append(["paper_as_printed", "appendix_variance", "model1", n,
                     analytic.appendix_variance_paper(L, truth.sigma2, n) if one_factor else "n/a"])
    rows.append(["paper_as_printed", "rho_squared", "", "", analytic.rho_squared(truth.means) if one_factor else "n/a"])
    rows.append(["paper_as_printed", "nstar", "model1", "",
                 analytic.nstar_paper(L, truth.sigma2, truth.means) if one_factor else "n/a"])
    for name in cfg.models:
        spec = get_model(name)
        if spec.saturated:
            continue
        p = level_design(spec, grid).p
        rows.append(["exact", "nstar", name, "", analytic.nstar_exact(spec, grid, truth) if p < L else "n/a"])
    return rows


def nstar_rows(cfg: RunConfig, grid, truth) -> list[list]:
    rows = []
    one_factor = grid.num_factors == 1 and grid.factors[0].has_default_encoding
    for name in cfg.models:
        spec = get_model(name)
        if spec.saturated:
            continue
        p = level_design(spec, grid).p
        bias = analytic.exact_linear_mse(spec, grid, truth, grid.L).bias_sq
        exact = analytic.nstar_exact(spec, grid, truth) if p < grid.L else "n/a"
        paper = analytic.nstar_paper(grid.L, truth.sigma2, truth.means) if (one_factor and name == "model1") else "n/a"
        rows.append([name, p, bias, exact, paper])
    return rows


def _table(header, rows) -> str:
    cells = [header] + [[fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


# ---------------------------------------------------------------------------


def cmd_sweep(cfg: RunConfig, out: str | None) -> int:
    grid, truth = cfg.validate()
    report = run_sweep(cfg.models, grid, truth, cfg.n_grid, cfg.reps, cfg.seed(), workers=cfg.workers, crn=cfg.crn)
    path = out or cfg.out or "sweep.csv"
    _write(path, _csv_text(SWEEP_HEADER, sweep_rows(report)))
    print(f"wrote {len(report.cells)} rows to {path} (L={grid.L}, reps={cfg.reps}, seed={cfg.base_seed})")
    for source in ("analytic", "mc"):
        steps = ", ".join(f"{a}-{b}: {m}" if a != b else f"{a}: {m}" for a, b, m in best_model_ladder(report, source))
        print(f"best model ({source}): {steps}")
    hits, total = oracle_agreement(report)
    print(f"MC within 4 stderr of exact MSE: {hits}/{total} cells")
    for c in report.crossovers:
        print(f"crossover {c.model_a} -> {c.model_b}: n*={fmt(c.nstar_exact)}, "
              f"MC bracket={c.interval_mc}, analytic bracket={c.interval_analytic}")
    return EXIT_OK


def cmd_analytic(cfg: RunConfig, out: str | None) -> int:
    grid, truth = cfg.validate()
    rows = analytic_rows(cfg, grid, truth)
    print(_table(ANALYTIC_HEADER, rows))
    path = out or cfg.out or "analytic.csv"
    _write(path, _csv_text(ANALYTIC_HEADER, rows))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_nstar(cfg: RunConfig, out: str | None) -> int:
    grid, truth = cfg.validate()
    rows = nstar_rows(cfg, grid, truth)
    print(_table(NSTAR_HEADER, rows))
    if out:
        _write(out, _csv_text(NSTAR_HEADER, rows))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: str | None, bound_scale: float = 1.0) -> int:
    grid, truth = cfg.validate()
    checks = run_checks(grid, truth, cfg.models, cfg.n_grid, cfg.reps, cfg.seed(),
                        workers=cfg.workers, bound_scale=bound_scale)
    header = ["check", "measured", "bound", "status", "detail"]
    rows = [[c.name, c.measured, c.bound, c.status, c.detail] for c in checks]
    print(_table(header, rows))
    if out:
        _write(out, _csv_text(header, rows))
    failed = [c.name for c in checks if c.status == FAIL]
    print("all checks passed" if not failed else f"FAILED: {', '.join(failed)}")
    return EXIT_OK if all_passed(checks) else EXIT_VERIFY


COMMANDS = {"sweep": cmd_sweep, "analytic": cmd_analytic, "nstar": cmd_nstar, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metamodel-mse",
        description="Exact and Monte-Carlo MSE of direct vs regression-metamodel treatment estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("sweep", "MC + exact MSE for every (n, model); writes CSV"),
        ("analytic", "closed-form MSE table, printed formulas alongside exact ones"),
        ("nstar", "critical sample sizes where direct estimation takes over"),
        ("verify", "run the invariant suite; exit 3 on any failure"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="YAML config (defaults built in)")
        p.add_argument("--seed", type=int, metavar="U64", help="override run.base_seed")
        p.add_argument("--reps", type=int, metavar="INT", help="override run.reps")
        p.add_argument("--out", metavar="PATH", help="output CSV path")
        p.add_argument("--workers", type=int, metavar="INT", help="threads for MC cells (speed only)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set truth.sigma2=100")
        if name == "verify":
            p.add_argument("--bound-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg = cfg.with_override(key.strip(), value)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.reps is not None:
        cfg.reps = args.reps
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.bound_scale)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
