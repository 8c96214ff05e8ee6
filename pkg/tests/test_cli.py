import csv
import io
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from metamodel_mse.cli import SWEEP_HEADER, fmt, main
from metamodel_mse.config import RunConfig
from metamodel_mse.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden"


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestFormat:
    @pytest.mark.parametrize(
        "value, text",
        [
            (0.1 + 0.2, "0.3"),
            (1 / 3, "0.3333333333"),
            (2.0 / 3.0, "0.6666666667"),
            (1875.0, "1875"),
            (1e-20, "1e-20"),
            (float("inf"), "inf"),
            (42, "42"),
            ("n/a", "n/a"),
            # exact binary ties round half to even
            (0.125, "0.125"),
            (1.00000000005, "1"),  # stored just below the tie
        ],
    )
    def test_fmt(self, value, text):
        assert fmt(value) == text


class TestConfig:
    def test_default_round_trip(self):
        cfg = RunConfig()
        assert RunConfig.loads(cfg.dumps()) == cfg

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.integers(2, 6), min_size=1, max_size=3),
        st.floats(1e-3, 1e4),
        st.lists(st.sampled_from(["model1", "direct"]), min_size=1, max_size=2, unique=True),
        st.integers(2, 10**6),
        st.integers(0, 2**64 - 1),
        st.booleans(),
    )
    def test_round_trip(self, levels, sigma2, models, reps, seed, crn):
        cfg = RunConfig(
            factors=[],
            sigma2=sigma2,
            means=None,
            preset=None,
            models=models,
            reps=reps,
            base_seed=seed,
            crn=crn,
        )
        from metamodel_mse.config import FactorConfig

        cfg.factors = [FactorConfig(f"f{i}", k, [float(j) * 0.5 for j in range(k)] if i == 0 else None)
                       for i, k in enumerate(levels)]
        L = 1
        for k in levels:
            L *= k
        cfg.means = [float(i) / 3 for i in range(L)]
        cfg.n_grid = [L, 2 * L]
        assert RunConfig.loads(cfg.dumps()) == cfg

    def test_override(self):
        cfg = RunConfig().with_override("truth.sigma2", "12.5")
        assert cfg.sigma2 == 12.5
        cfg = cfg.with_override("truth.means", "[" + ",".join(["1"] * 25) + "]")
        assert cfg.preset is None and cfg.means == [1.0] * 25

    @pytest.mark.parametrize(
        "text, field",
        [
            ("bogus: 1", "bogus"),
            ("run: {reps: many}", "run.reps"),
            ("run: {n_grid: [100, 101]}", "run.n_grid"),
            ("truth: {sigma2: -1}", "sigma2"),
            ("grid: {factors: [{name: a, levels: 1}]}", "grid"),
            ("models: [model7]", "models"),
            ("truth: {means: [1, 2]}", "truth"),
        ],
    )
    def test_validation_names_field(self, text, field):
        with pytest.raises(ConfigError, match=field):
            RunConfig.loads(text).validate()


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "run: {n_grid: [100, 101]}")
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 1
        err = capsys.readouterr().err
        assert "run.n_grid" in err and "n=101" in err and "L=25" in err

    def test_missing_file(self, tmp_path):
        assert main(["nstar", "--config", str(tmp_path / "nope.yaml")]) == 1

    def test_rank_failure(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "grid: {factors: [{name: a, levels: 2}, {name: b, levels: 3}]}\n"
            "truth: {sigma2: 1.0, means: [1, 2, 3, 4, 5, 6]}\n"
            "models: [model3]\n"
            "run: {n_grid: [12]}\n",
        )
        assert main(["analytic", "--config", cfg, "--out", str(tmp_path / "a.csv")]) == 2
        assert "rank deficient" in capsys.readouterr().err


class TestSweep:
    def test_golden(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(GOLDEN / "small.yaml"), "--out", str(out)]) == 0
        assert out.read_bytes() == (GOLDEN / "small_sweep.csv").read_bytes()

    def test_header_and_rows(self, tmp_path):
        out = tmp_path / "sweep.csv"
        main(["sweep", "--config", str(GOLDEN / "small.yaml"), "--out", str(out)])
        rows = read_csv(out)
        assert rows[0] == SWEEP_HEADER
        assert len(rows) == 1 + 4 * 2

    def test_default_config_row_count(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--reps", "2", "--out", str(out)]) == 0
        assert len(read_csv(out)) == 67

    @pytest.mark.parametrize("workers", ["1", "4"])
    def test_byte_identical(self, tmp_path, workers):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["sweep", "--reps", "200", "--seed", "99", "--workers", workers]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_flag_changes_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--reps", "20", "--seed", "1", "--out", str(a)])
        main(["sweep", "--reps", "20", "--seed", "2", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()


class TestAnalytic:
    def run(self, tmp_path, means, sigma2=100.0):
        cfg = write_config(
            tmp_path,
            yaml.safe_dump({
                "grid": {"factors": [{"name": "x", "levels": 5}]},
                "truth": {"sigma2": sigma2, "means": means},
                "models": ["model1", "direct"],
                "run": {"n_grid": [100, 1000]},
            }),
        )
        out = tmp_path / "analytic.csv"
        assert main(["analytic", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["source", "quantity", "model", "n", "value"]
        return {(r[0], r[1], r[2], r[3]): r[4] for r in rows[1:]}

    def test_linear_truth_inf(self, tmp_path):
        table = self.run(tmp_path, [1, 2, 3, 4, 5])
        assert table[("exact", "nstar", "model1", "")] == "inf"

    def test_bump(self, tmp_path):
        table = self.run(tmp_path, [0, 0, 1, 0, 0])
        assert float(table[("exact", "nstar", "model1", "")]) == pytest.approx(1875, abs=1e-6)
        assert table[("paper_as_printed", "theorem1_mse", "model1", "100")] != ""
        assert table[("exact", "modelfree_mse", "direct", "100")] == "25"

    def test_constant_truth(self, tmp_path):
        table = self.run(tmp_path, [3, 3, 3, 3, 3])
        assert table[("paper_as_printed", "rho_squared", "", "")] == "0"
        assert table[("paper_as_printed", "nstar", "model1", "")] == "inf"

    def test_multi_factor_marks_na(self, tmp_path, capsys):
        out = tmp_path / "a.csv"
        assert main(["analytic", "--set", "run.n_grid=[100]", "--out", str(out)]) == 0
        rows = {(r[0], r[1]): r[4] for r in read_csv(out)[1:]}
        assert rows[("paper_as_printed", "theorem1_mse")] == "n/a"


def test_nstar_command(tmp_path, capsys):
    out = tmp_path / "n.csv"
    cfg = str(GOLDEN / "small.yaml")
    assert main(["nstar", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["model", "p", "bias_sq", "nstar_exact", "nstar_paper"]
    assert rows[1][0] == "model1" and float(rows[1][3]) == pytest.approx(1875)
    # the symmetric bump has no linear trend, so the printed formula divides by zero
    assert rows[1][4] == "inf"


class TestVerify:
    CHEAP = ["--reps", "400", "--set", "run.n_grid=[100, 500]"]

    def test_passes(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        assert main(["verify", *self.CHEAP, "--out", str(out)]) == 0
        rows = read_csv(out)
        status = {r[0]: r[3] for r in rows[1:]}
        assert all(s in ("PASS", "INFO") for s in status.values())
        assert status["variance_theorem_printed_vs_exact"] == "INFO"
        assert status["cov_grandmean_slope"] == "PASS"

    def test_sabotaged_bounds_fail(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        assert main(["verify", *self.CHEAP, "--bound-scale", "0", "--out", str(out)]) == 3
        rows = read_csv(out)
        status = {r[0]: r[3] for r in rows[1:]}
        assert status["variance_trace_identity"] == "FAIL"
        assert status["oracle_agreement"] == "FAIL"
        assert "INFO" in status.values() and "PASS" not in status.values()

    @pytest.mark.slow
    def test_default_config_all_pass(self, capsys):
        assert main(["verify"]) == 0
        assert "all checks passed" in capsys.readouterr().out
