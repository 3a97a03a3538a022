import math

import numpy as np
import pytest

from aeromon.baselines import MethodSpec, build_monitor, fit_pca, ny_score
from aeromon.conformal import monitor_step, threshold
from aeromon.datasets import DatasetBundle, Observation
from aeromon.errors import RankDeficiencyError
from aeromon.predictor import fit_least_squares


class TestFitPca:
    def test_rank_one_data_loses_nothing(self):
        gen = np.random.default_rng(0)
        direction = np.array([3.0, 4.0]) / 5.0
        data = gen.normal(size=(40, 1)) * direction  # a line through the origin
        pca = fit_pca(data, dims=1)
        projected = pca.project_batch(data)
        reconstructed = projected @ pca.basis + pca.mean
        assert np.max(np.abs(reconstructed - data)) < 1e-10

    def test_mean_projects_to_zero(self):
        gen = np.random.default_rng(1)
        data = gen.normal(size=(100, 18)) + 5.0
        pca = fit_pca(data, dims=6)
        np.testing.assert_allclose(pca.project(data.mean(axis=0)), np.zeros(6), atol=1e-10)

    def test_basis_orthonormal(self):
        gen = np.random.default_rng(2)
        pca = fit_pca(gen.normal(size=(200, 18)), dims=6)
        gram = pca.basis @ pca.basis.T
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)

    def test_rank_deficiency_reports_achieved_rank(self):
        gen = np.random.default_rng(3)
        base = gen.normal(size=(50, 2))
        mix = gen.normal(size=(2, 18))
        with pytest.raises(RankDeficiencyError) as exc:
            fit_pca(base @ mix, dims=6)
        assert exc.value.achieved_rank == 2

    def test_needs_enough_observations(self):
        with pytest.raises(ValueError):
            fit_pca(np.zeros((3, 18)), dims=6)


class TestNyScore:
    def test_positive_ny(self):
        y = np.array([0.0, 0.0, 0.0, 0.4, 0.0, 0.0])
        assert ny_score(y) == -0.4

    def test_negative_ny(self):
        y = np.array([0.0, 0.0, 0.0, -0.6, 0.0, 0.0])
        assert ny_score(y) == -0.6

    def test_zero_is_the_maximum(self):
        assert ny_score(np.zeros(6)) == 0.0


def synthetic_bundle(gen, n_unsafe=12, n_safe=400, past_steps=2):
    """Gaussian two-cluster bundle in observation space with affine targets."""
    dim = (past_steps + 1) * 6
    unsafe = gen.normal(size=(n_unsafe, dim)) * 0.3 + 2.0
    safe = gen.normal(size=(n_safe, dim)) * 0.3
    M0 = gen.normal(size=(6, dim)) * 0.2
    mu0 = gen.normal(size=6) * 0.1
    targets = safe @ M0.T + mu0 + 0.01 * gen.normal(size=(n_safe, 6))
    meta = {"format_version": 1, "dt": 0.05, "past_steps": past_steps,
            "lead_steps": 5, "safe_obs_per_traj": 50, "n_unsafe": n_unsafe,
            "n_safe_trajectories": 8, "n_too_early": 0,
            "n_rollouts": 20, "master_seed": 0, "config": {}}
    return DatasetBundle(
        error_observations=[Observation(values=v, trajectory_id=i, step_index=30)
                            for i, v in enumerate(unsafe)],
        safe_observations=[Observation(values=v, trajectory_id=100 + i, step_index=20)
                           for i, v in enumerate(safe)],
        regression_targets=targets,
        metadata=meta,
    )


class TestBuildMonitor:
    def test_wiring_dimensions(self, small_fit):
        _, _, _, monitors = small_fit
        assert monitors["no_pred"].unsafe_points.shape[1] == 18
        assert monitors["pca"].unsafe_points.shape[1] == 6
        assert monitors["full"].unsafe_points.shape[1] == 6
        assert monitors["current_ny"].unsafe_points is None
        assert monitors["pred_ny"].unsafe_points is None

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            MethodSpec(name="mystery")

    def test_missing_predictor_rejected(self, small_fit):
        _, bundle, _, _ = small_fit
        for name in ("full", "pred_ny"):
            with pytest.raises(ValueError):
                build_monitor(MethodSpec(name=name), bundle, predictor=None)

    def test_current_ny_constant_scores(self):
        gen = np.random.default_rng(4)
        bundle = synthetic_bundle(gen)
        # Pin |Ny| of the newest frame of every error observation to 0.3.
        for obs in bundle.error_observations:
            obs.values[-3] = 0.3
        monitor = build_monitor(MethodSpec(name="current_ny"), bundle)
        np.testing.assert_array_equal(monitor.alphas_sorted,
                                      np.full(len(bundle.error_observations), -0.3))
        n = monitor.n_calibration
        for eps in (0.1, 0.5, n / (n + 1) - 1e-9):
            assert threshold(monitor.alphas_sorted, eps) == -0.3

    def test_loo_calibration_used_for_nn_methods(self, small_fit):
        _, _, _, monitors = small_fit
        for name in ("full", "no_pred", "pca"):
            monitor = monitors[name]
            assert monitor.alphas_sorted.size == monitor.unsafe_points.shape[0]

    def test_pca_fit_on_safe_observations_only(self):
        gen = np.random.default_rng(5)
        bundle = synthetic_bundle(gen)
        monitor = build_monitor(MethodSpec(name="pca", pca_dims=4), bundle)
        safe = bundle.safe_matrix()
        np.testing.assert_allclose(monitor.transform.mean, safe.mean(axis=0), atol=1e-12)

    def test_guarantee_is_score_agnostic(self):
        # The miss-rate bound is marginal over the calibration draw, so each
        # replication redraws the unsafe set along with one fresh test point;
        # the transform stays fixed (it is fit on safe data only).
        gen = np.random.default_rng(6)
        base = synthetic_bundle(gen, n_unsafe=15)
        predictor = fit_least_squares(base.safe_matrix(), base.regression_targets)
        dim = base.safe_matrix().shape[1]
        replications = 500
        for name in ("full", "no_pred", "pca", "current_ny", "pred_ny"):
            for eps in (0.1, 0.25):
                misses = 0
                for _ in range(replications):
                    unsafe = gen.normal(size=(15, dim)) * 0.3 + 2.0
                    for obs, values in zip(base.error_observations, unsafe):
                        obs.values[:] = values
                    monitor = build_monitor(MethodSpec(name=name), base, predictor)
                    test_point = gen.normal(size=dim) * 0.3 + 2.0
                    verdict = monitor_step(monitor, test_point.reshape(3, 6), eps)
                    misses += 0 if verdict.alert else 1
                bound = eps + 4 * math.sqrt(eps * (1 - eps) / replications)
                assert misses / replications <= bound, (name, eps, misses / replications)

    def test_five_monitors_share_metadata(self, small_fit):
        config, _, _, monitors = small_fit
        for monitor in monitors.values():
            assert monitor.metadata["dt"] == config.plant.dt
            assert monitor.metadata["past_steps"] == config.monitoring.past_steps
            assert monitor.metadata["lead_steps"] == config.monitoring.lead_steps
