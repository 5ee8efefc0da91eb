import numpy as np
import pytest

from gpdiag.covariance import VarianceParams
from gpdiag.data import export_csv, ingest_csv
from gpdiag.errors import ParameterError, ValidationError
from gpdiag.simulation import (
    TRUTH_GRID,
    Contamination,
    SimConfig,
    contaminate,
    gp_draws,
    simulate_gp,
    standard_contamination,
    trend_outlier_demo,
)


class TestSimulateGp:
    def test_pure_noise_variance(self):
        cfg = SimConfig(dims=(20, 20), truth=VarianceParams(0.0, 1.0, 5.0), seed=2)
        ds = simulate_gp(cfg)
        m = 400
        assert abs(np.var(ds.y, ddof=1) - 1.0) < 3.0 / np.sqrt(2 * m)

    def test_lag1_covariance_matches_kernel(self):
        # MC check of Cov(y_i, y_{i+1}) = sigma_s2 exp(-sqrt(2)/rho)
        truth = VarianceParams(2.0, 5.0, 5.0)
        cfg = SimConfig(dims=(200,), truth=truth, seed=5)
        draws = np.stack([simulate_gp(cfg, r).y for r in range(200)])
        centered = draws - draws.mean(axis=0)
        lag1 = np.mean(np.sum(centered[:, :-1] * centered[:, 1:], axis=1) / 199)
        expected = 2.0 * np.exp(-np.sqrt(2) / 5.0)
        assert abs(lag1 - expected) < 0.35

    def test_seed_determinism(self):
        cfg = SimConfig(dims=(30,), truth=VarianceParams(2, 5, 5), seed=9)
        a = simulate_gp(cfg, replicate=3)
        b = simulate_gp(cfg, replicate=3)
        assert np.array_equal(a.y, b.y)

    def test_replicates_differ(self):
        cfg = SimConfig(dims=(30,), truth=VarianceParams(2, 5, 5), seed=9)
        assert not np.array_equal(simulate_gp(cfg, 0).y, simulate_gp(cfg, 1).y)

    def test_gp_draws_shape_and_determinism(self):
        loc = np.random.default_rng(1).uniform(0, 1, (50, 2))
        d1 = gp_draws(loc, VarianceParams(1, 1, 0.3), 4, seed=11)
        d2 = gp_draws(loc, VarianceParams(1, 1, 0.3), 4, seed=11)
        assert d1.shape == (4, 50)
        assert np.array_equal(d1, d2)

    def test_mean_fn(self):
        cfg = SimConfig(
            dims=(16,),
            truth=VarianceParams(0.0, 1e-12, 1.0),
            mean_fn=lambda s: 2.0 * s[0],
            seed=0,
        )
        ds = simulate_gp(cfg)
        assert np.allclose(ds.y, 2.0 * np.arange(1, 17), atol=1e-4)


class TestContaminate:
    def test_outlier_verbatim(self):
        cfg = SimConfig(dims=(200,), truth=VarianceParams(2, 5, 5), seed=3)
        ds = simulate_gp(cfg)
        out = contaminate(ds, standard_contamination("outlier", 200))
        assert out.y[99] == 18.0
        changed = out.y != ds.y
        assert changed.sum() == 1

    def test_mean_shift_last_half(self):
        cfg = SimConfig(dims=(200,), truth=VarianceParams(2, 5, 5), seed=3)
        ds = simulate_gp(cfg)
        out = contaminate(ds, standard_contamination("mean_shift", 200))
        assert np.allclose(out.y[100:], ds.y[100:] + 5.0)
        assert np.array_equal(out.y[:100], ds.y[:100])

    def test_zero_amount_shift_is_identity(self):
        cfg = SimConfig(dims=(40,), truth=VarianceParams(2, 5, 5), seed=3)
        ds = simulate_gp(cfg)
        out = contaminate(ds, Contamination("mean_shift", span=(20, 40), amount=0.0))
        assert np.array_equal(out.y, ds.y)

    def test_range_change_replaces_span(self):
        cfg = SimConfig(dims=(100,), truth=VarianceParams(2, 5, 5), seed=3)
        ds = simulate_gp(cfg)
        rng = np.random.Generator(np.random.Philox(key=77))
        out = contaminate(
            ds,
            Contamination("range_change", span=(50, 100), rho=16.67),
            truth=cfg.truth,
            rng=rng,
        )
        assert np.array_equal(out.y[:50], ds.y[:50])
        assert not np.array_equal(out.y[50:], ds.y[50:])

    def test_span_out_of_bounds(self):
        cfg = SimConfig(dims=(40,), truth=VarianceParams(2, 5, 5), seed=3)
        ds = simulate_gp(cfg)
        with pytest.raises(ValidationError):
            contaminate(ds, Contamination("mean_shift", span=(20, 60), amount=1.0))

    def test_commutes_with_export_import(self, tmp_path):
        cfg = SimConfig(dims=(40,), truth=VarianceParams(2, 5, 5), seed=8)
        ds = simulate_gp(cfg)
        c = Contamination("outlier", position=10, value=18.0)
        direct = contaminate(ds, c)
        p = tmp_path / "sim.csv"
        export_csv(ds, p)
        back = ingest_csv(p, {"loc": "s1", "outcome": "y"})
        via_file = contaminate(back, c)
        assert np.array_equal(direct.y, via_file.y)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            Contamination("smudge")


class TestTruthGrid:
    def test_eight_combinations(self):
        assert len(TRUTH_GRID) == 8
        assert {(t.sigma_s2, t.sigma_e2, t.rho) for t in TRUTH_GRID} == {
            (s, e, r) for s in (2.0, 10.0) for e in (5.0, 0.1) for r in (5.0, 16.67)
        }


class TestDemo:
    def test_structure(self):
        demo = trend_outlier_demo(seed=4)
        ds = demo["dataset"]
        assert ds.is_grid and ds.grid.dims == (20, 20)
        assert set(ds.covariates) == {"ns_trend", "spike_cells"}
        assert demo["outlier_cells"].shape == (10,)
        assert np.var(ds.covariates["ns_trend"], ddof=1) == pytest.approx(8.0)
        assert ds.covariates["spike_cells"].sum() == 10

    def test_seeded(self):
        a = trend_outlier_demo(seed=4)["dataset"].y
        b = trend_outlier_demo(seed=4)["dataset"].y
        assert np.array_equal(a, b)
        c = trend_outlier_demo(seed=5)["dataset"].y
        assert not np.array_equal(a, c)
