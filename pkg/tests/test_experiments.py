"""End-to-end studies at reduced scale, plus the draws/report file formats."""

import json

import numpy as np
import pytest

from cayley_mcmc.experiments import (
    ExperimentReport,
    SpikedDataSpec,
    read_draws_csv,
    run_bingham_experiment,
    run_normal_approx_experiment,
    run_uniform_experiment,
    simulate_spiked_data,
    write_draws_csv,
    write_report,
)
from cayley_mcmc.sampler import RunConfig


class TestSpikedDataSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SpikedDataSpec(n=0, p=5, k=2, sigma2=1.0, lam=np.array([2.0, 1.0]))
        with pytest.raises(ValueError):
            SpikedDataSpec(n=10, p=5, k=2, sigma2=1.0, lam=np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            SpikedDataSpec(n=10, p=5, k=2, sigma2=-1.0, lam=np.array([2.0, 1.0]))


class TestSimulateSpikedData:
    def test_shapes_and_determinism(self):
        spec = SpikedDataSpec(n=30, p=8, k=2, sigma2=1.0, lam=np.array([3.0, 1.0]), seed=5)
        Y1, Q1 = simulate_spiked_data(spec)
        Y2, Q2 = simulate_spiked_data(spec)
        assert Y1.shape == (30, 8)
        assert Q1.Q.shape == (8, 2)
        assert np.array_equal(Y1, Y2)
        assert np.array_equal(Q1.Q, Q2.Q)

    def test_small_signal_limit_is_isotropic(self):
        """As the signal eigenvalues vanish, the sample covariance approaches
        sigma^2 I in operator norm."""
        spec = SpikedDataSpec(n=20000, p=5, k=2, sigma2=2.0,
                              lam=np.array([2e-4, 1e-4]), seed=6)
        Y, _ = simulate_spiked_data(spec)
        cov = Y.T @ Y / spec.n
        dev = np.linalg.norm(cov - 2.0 * np.eye(5), ord=2)
        assert dev < 0.15

    def test_covariance_matches_model(self):
        spec = SpikedDataSpec(n=60000, p=4, k=1, sigma2=1.0, lam=np.array([4.0]), seed=7)
        Y, Q = simulate_spiked_data(spec)
        Sigma = 1.0 * (Q.Q @ np.diag(spec.lam) @ Q.Q.T + np.eye(4))
        cov = Y.T @ Y / spec.n
        assert np.linalg.norm(cov - Sigma, ord=2) < 0.15


class TestUniformExperiment:
    def test_small_run_produces_metrics(self, tmp_path):
        report = run_uniform_experiment(5, 2, draws=300, seed=3, thin=2,
                                        burn_in=300, out_dir=tmp_path)
        assert 0.0 <= report.metrics["ks_top_left_entry"] <= 1.0
        assert report.metrics["n_draws"] == 300
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "draws.csv").exists()

    def test_metrics_recomputable_from_draws(self, tmp_path):
        from cayley_mcmc.densities import EntryMarginal
        from cayley_mcmc.diagnostics import ks_statistic
        report = run_uniform_experiment(5, 2, draws=200, seed=4, thin=2,
                                        burn_in=200, out_dir=tmp_path)
        _, _, points = read_draws_csv(tmp_path / "draws.csv")
        ks = ks_statistic(points[:, 0, 0], EntryMarginal(5, 2).cdf)
        assert ks == pytest.approx(report.metrics["ks_top_left_entry"], abs=1e-12)


class TestBinghamExperiment:
    def test_reduced_scale_run(self, tmp_path):
        spec = SpikedDataSpec(n=40, p=10, k=2, sigma2=1.0,
                              lam=np.array([4.0, 2.0]), seed=8)
        run = RunConfig(iterations=600, burn_in=200, seed=9)
        report = run_bingham_experiment(spec, run, out_dir=tmp_path)
        m = report.metrics
        assert 0.0 <= m["theta1_tv_between_chains"] <= 1.0
        assert len(m["acceptance_rates"]) == 2
        assert m["n_draws_per_chain"] == 400
        assert "theta1_chain0" in report.histograms
        assert "theta2_chain1" in report.histograms

    def test_posterior_concentrates_near_mode(self):
        spec = SpikedDataSpec(n=200, p=8, k=1, sigma2=1.0,
                              lam=np.array([6.0]), seed=10)
        run = RunConfig(iterations=800, burn_in=300, seed=11)
        report = run_bingham_experiment(spec, run)
        assert report.metrics["theta1_mean_chain0"] < np.pi / 4


class TestNormalApproxExperiment:
    def test_medians_and_verdict(self):
        report = run_normal_approx_experiment(2, (20, 60), replicates=30, seed=12)
        meds = report.metrics["epsilon_medians"]
        assert len(meds) == 2
        assert report.metrics["medians_strictly_decreasing"] == (meds[1] < meds[0])

    def test_rejects_small_grid(self):
        with pytest.raises(ValueError):
            run_normal_approx_experiment(5, (4, 50), replicates=5, seed=0)

    def test_deterministic_given_seed(self):
        r1 = run_normal_approx_experiment(2, (15, 30), replicates=10, seed=13)
        r2 = run_normal_approx_experiment(2, (15, 30), replicates=10, seed=13)
        assert r1.metrics == r2.metrics


class TestFileFormats:
    def _batch(self):
        from cayley_mcmc.cayley import ManifoldDims
        from cayley_mcmc.densities import PullbackTarget, uniform_log_density
        from cayley_mcmc.sampler import ProposalConfig, run_chain
        target = PullbackTarget(uniform_log_density(), ManifoldDims(5, 2))
        run = RunConfig(iterations=60, burn_in=20, seed=14)
        return run_chain(target, np.zeros(target.dim), ProposalConfig(scale=0.4), run)

    def test_draws_round_trip_exactly(self, tmp_path):
        batch = self._batch()
        path = tmp_path / "draws.csv"
        write_draws_csv(path, batch, manifold="stiefel", p=5, k=2)
        header, coords, points = read_draws_csv(path)
        assert header == {"manifold": "stiefel", "p": 5, "k": 2, "n_coords": 7}
        assert np.array_equal(coords, batch.coords_draws)
        assert np.array_equal(points, batch.manifold_draws)

    def test_report_json_excludes_runtime(self, tmp_path):
        report = ExperimentReport(name="x", config={"a": 1}, metrics={"m": 2.0},
                                  runtime_seconds=12.5)
        path = write_report(report, tmp_path)
        doc = json.loads(path.read_text())
        assert doc["name"] == "x"
        assert "runtime" not in json.dumps(doc)

    def test_report_writing_is_stable(self, tmp_path):
        report = ExperimentReport(name="x", config={"b": 2, "a": 1}, metrics={})
        p1 = write_report(report, tmp_path / "one")
        p2 = write_report(report, tmp_path / "two")
        assert p1.read_text() == p2.read_text()
