import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from metamodel_mse import kernels
from metamodel_mse.design import Factor, allocate_equal, build_grid
from metamodel_mse.errors import ConfigError
from metamodel_mse.simulate import DEFAULT_SEED, McEstimate, SeedSpec, generate_dataset, sample_condition
from metamodel_mse.truth import GroundTruth

from truths import grid_5x5


class TestSampleCondition:
    def test_vanishing_variance(self):
        x = sample_condition(5.0, 1e-12, 3, SeedSpec(1, 0), 0)
        assert np.all(np.abs(x - 5.0) < 1e-5)

    def test_clt_bound(self):
        x = sample_condition(0.0, 1.0, 10_000, SeedSpec(DEFAULT_SEED, 0), 0)
        assert abs(x.mean()) < 4 / math.sqrt(10_000)

    def test_bitwise_repeatable(self):
        a = sample_condition(3.0, 2.0, 50, SeedSpec(9, 4), 2)
        b = sample_condition(3.0, 2.0, 50, SeedSpec(9, 4), 2)
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("sigma2", [0.0, -1.0])
    def test_sigma2_guard(self, sigma2):
        with pytest.raises(ConfigError):
            sample_condition(0.0, sigma2, 3, SeedSpec(), 0)

    def test_count_guard(self):
        with pytest.raises(ConfigError):
            sample_condition(0.0, 1.0, 0, SeedSpec(), 0)

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            SeedSpec(2**64)
        with pytest.raises(ConfigError):
            SeedSpec(-1)


class TestGenerateDataset:
    def test_shape(self):
        grid = grid_5x5()
        ds = generate_dataset(GroundTruth((0.0,) * 25, 1.0), allocate_equal(100, grid), SeedSpec())
        assert len(ds.samples) == 25 and all(len(s) == 4 for s in ds.samples)
        assert ds.n == 100

    def test_near_deterministic(self):
        grid = build_grid([Factor("x", 2)])
        ds = generate_dataset(GroundTruth((10.0, 20.0), 1e-4), allocate_equal(10, grid), SeedSpec())
        np.testing.assert_allclose(ds.condition_means(), [10.0, 20.0], atol=0.1)

    def test_replications_differ_and_repeat(self):
        grid = build_grid([Factor("x", 3)])
        truth = GroundTruth((0.0, 1.0, 2.0), 1.0)
        alloc = allocate_equal(30, grid)
        d0 = generate_dataset(truth, alloc, SeedSpec(5, 0))
        d1 = generate_dataset(truth, alloc, SeedSpec(5, 1))
        d0b = generate_dataset(truth, alloc, SeedSpec(5, 0))
        assert not np.array_equal(np.concatenate(d0.samples), np.concatenate(d1.samples))
        assert np.concatenate(d0.samples).tobytes() == np.concatenate(d0b.samples).tobytes()

    def test_dimension_mismatch(self):
        grid = build_grid([Factor("x", 3)])
        with pytest.raises(ConfigError):
            generate_dataset(GroundTruth((0.0, 1.0), 1.0), allocate_equal(30, grid), SeedSpec())

    def test_parallel_generation_identical(self):
        grid = build_grid([Factor("x", 4)])
        truth = GroundTruth((1.0, 2.0, 3.0, 4.0), 2.0)
        alloc = allocate_equal(40, grid)

        def gen(r):
            return np.concatenate(generate_dataset(truth, alloc, SeedSpec(77, r)).samples).tobytes()

        serial = [gen(r) for r in range(32)]
        for workers in (2, 4):
            with ThreadPoolExecutor(workers) as pool:
                assert list(pool.map(gen, reversed(range(32))))[::-1] == serial


@pytest.fixture(scope="class")
def draws():
    L, m, R = 5, 4, 10_000
    sigma2 = 9.0
    out = np.empty((R, L, m))
    for c in range(L):
        keys = kernels.stream_keys(31337, np.arange(R), L)[:, c]
        for r in range(R):
            out[r, c] = sample_condition(0.0, sigma2, m, SeedSpec(31337, r), c)
        assert int(keys[0]) == SeedSpec(31337, 0).stream_key(c)
    return out, sigma2


class TestDistribution:
    """Pooled statistics over R = 10,000 replications with n/L = 4."""

    def test_pooled_variance(self, draws):
        x, sigma2 = draws
        pooled = x.var(axis=2, ddof=1).mean()
        assert abs(pooled / sigma2 - 1) < 0.05

    def test_cross_condition_correlation(self, draws):
        x, _ = draws
        # pair samples of different conditions by (replication, draw index)
        flat = x.transpose(1, 0, 2).reshape(x.shape[1], -1)
        corr = np.corrcoef(flat)
        off = corr[~np.eye(corr.shape[0], dtype=bool)]
        assert np.max(np.abs(off)) < 0.02


def test_mc_estimate_from_values():
    est = McEstimate.from_values(np.array([1.0, 2.0, 3.0, 4.0]))
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(ConfigError):
        McEstimate.from_values(np.array([1.0]))
