import numpy as np
import pytest

from aeromon.datasets import (
    bundle_config,
    collect_dataset,
    extract_error_observation,
    load_bundle,
    make_observation,
    rollout_for_index,
    save_bundle,
    subsample_safe,
)
from aeromon.errors import (
    InsufficientHistoryError,
    ScenarioInfeasibleError,
    TooEarlyFailureError,
)
from aeromon.plant import Trajectory

from conftest import small_config


def ramp_trajectory(n_steps: int = 101, dt: float = 0.05) -> Trajectory:
    """Outputs whose entries encode (step, component) for index bookkeeping."""
    outputs = np.arange(n_steps)[:, None] * 10.0 + np.arange(6)[None, :]
    return Trajectory(dt=dt, outputs=outputs.astype(float))


class TestMakeObservation:
    def test_stacks_three_frames_oldest_first(self):
        traj = ramp_trajectory()
        obs = make_observation(traj, t=5, past_steps=2)
        assert obs.values.shape == (18,)
        np.testing.assert_array_equal(
            obs.values, np.concatenate([traj.outputs[3], traj.outputs[4], traj.outputs[5]]))

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistoryError):
            make_observation(ramp_trajectory(), t=1, past_steps=2)

    def test_lowest_valid_index(self):
        traj = ramp_trajectory()
        obs = make_observation(traj, t=2, past_steps=2)
        np.testing.assert_array_equal(
            obs.values, np.concatenate([traj.outputs[0], traj.outputs[1], traj.outputs[2]]))

    def test_records_origin(self):
        obs = make_observation(ramp_trajectory(), t=7, past_steps=2, trajectory_id=42)
        assert (obs.trajectory_id, obs.step_index) == (42, 7)

    def test_current_output_is_newest_frame(self):
        traj = ramp_trajectory()
        obs = make_observation(traj, t=9, past_steps=2)
        np.testing.assert_array_equal(obs.current_output, traj.outputs[9])


class TestExtractErrorObservation:
    def test_index_arithmetic(self):
        traj = ramp_trajectory()
        obs = extract_error_observation(traj, t_fail=40, lead_steps=5, past_steps=2)
        assert obs.step_index == 35
        np.testing.assert_array_equal(
            obs.values, np.concatenate([traj.outputs[33], traj.outputs[34], traj.outputs[35]]))

    def test_too_early_failure(self):
        with pytest.raises(TooEarlyFailureError):
            extract_error_observation(ramp_trajectory(), t_fail=6, lead_steps=5, past_steps=2)

    def test_exact_boundary(self):
        traj = ramp_trajectory()
        obs = extract_error_observation(traj, t_fail=7, lead_steps=5, past_steps=2)
        np.testing.assert_array_equal(
            obs.values, np.concatenate([traj.outputs[0], traj.outputs[1], traj.outputs[2]]))


class TestSubsampleSafe:
    def test_draws_fifty_distinct_valid_anchors(self):
        traj = ramp_trajectory(101)  # last index T = 100
        pairs = subsample_safe(traj, count=50, lead_steps=5, past_steps=2, seed=1)
        anchors = [obs.step_index for obs, _ in pairs]
        assert len(anchors) == 50
        assert len(set(anchors)) == 50
        assert min(anchors) >= 2 and max(anchors) <= 95

    def test_clamps_to_all_valid_indices(self):
        traj = ramp_trajectory(101)
        pairs = subsample_safe(traj, count=1000, lead_steps=5, past_steps=2, seed=1)
        assert len(pairs) == 94  # t in [2, 95]

    def test_deterministic_given_seed(self):
        traj = ramp_trajectory(101)
        a = subsample_safe(traj, 50, 5, 2, seed=9)
        b = subsample_safe(traj, 50, 5, 2, seed=9)
        assert [o.step_index for o, _ in a] == [o.step_index for o, _ in b]

    def test_targets_are_future_outputs(self):
        traj = ramp_trajectory(101)
        for obs, target in subsample_safe(traj, 20, 5, 2, seed=3):
            np.testing.assert_array_equal(target, traj.outputs[obs.step_index + 5])

    def test_rejects_unsafe_trajectory(self):
        traj = ramp_trajectory()
        traj.failure_index = 50
        with pytest.raises(ValueError):
            subsample_safe(traj, 10, 5, 2, seed=0)


class TestCollectDataset:
    def test_exact_unsafe_count_and_metadata(self, small_fit):
        config, bundle, _, _ = small_fit
        assert len(bundle.error_observations) == config.n_unsafe
        meta = bundle.metadata
        assert meta["n_safe_trajectories"] > 0
        assert len(bundle.safe_observations) == len(bundle.regression_targets)
        assert meta["n_rollouts"] >= config.n_unsafe

    def test_infinite_limit_is_infeasible(self):
        config = small_config()
        config.plant.ny_limit = float("inf")
        config.attempt_cap_factor = 5
        with pytest.raises(ScenarioInfeasibleError):
            collect_dataset(config, 2, master_seed=0)

    def test_deterministic_bundle_bytes(self, tmp_path):
        config = small_config(n_unsafe=3)
        config.attempt_cap_factor = 200
        paths = []
        for name in ("a.json", "b.json"):
            bundle = collect_dataset(config, 3, master_seed=55)
            path = tmp_path / name
            save_bundle(bundle, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_error_observations_sit_lead_steps_before_crossing(self, small_fit):
        config, bundle, _, _ = small_fit
        mon = config.monitoring
        master = bundle.metadata["master_seed"]
        for obs in bundle.error_observations:
            traj = rollout_for_index(bundle_config(bundle), master, obs.trajectory_id)
            assert traj.failure_index is not None
            assert obs.step_index == traj.failure_index - mon.lead_steps
            # Re-extracted buffer matches the stored one bit-exactly.
            again = make_observation(traj, obs.step_index, mon.past_steps)
            assert again.values.tobytes() == obs.values.tobytes()

    def test_regression_targets_match_source_trajectories(self, small_fit):
        config, bundle, _, _ = small_fit
        mon = config.monitoring
        master = bundle.metadata["master_seed"]
        cfg = bundle_config(bundle)
        cache = {}
        for obs, target in bundle.regression_pairs[::17]:
            if obs.trajectory_id not in cache:
                cache[obs.trajectory_id] = rollout_for_index(cfg, master, obs.trajectory_id)
            traj = cache[obs.trajectory_id]
            assert traj.failure_index is None
            assert target.tobytes() == traj.outputs[obs.step_index + mon.lead_steps].tobytes()


class TestBundlePersistence:
    def test_round_trip_bytes_stable(self, small_fit, tmp_path):
        _, bundle, _, _ = small_fit
        first = tmp_path / "first.json"
        second = tmp_path / "second.json"
        save_bundle(bundle, first)
        reloaded = load_bundle(first)
        save_bundle(reloaded, second)
        assert first.read_bytes() == second.read_bytes()

    def test_reload_preserves_values_exactly(self, small_fit, tmp_path):
        _, bundle, _, _ = small_fit
        path = tmp_path / "bundle.json"
        save_bundle(bundle, path)
        reloaded = load_bundle(path)
        assert reloaded.error_matrix().tobytes() == bundle.error_matrix().tobytes()
        assert reloaded.safe_matrix().tobytes() == bundle.safe_matrix().tobytes()
        assert reloaded.regression_targets.tobytes() == bundle.regression_targets.tobytes()

    def test_validation_rejects_tampered_counts(self, small_fit, tmp_path):
        from aeromon.errors import ArtifactError

        _, bundle, _, _ = small_fit
        path = tmp_path / "bundle.json"
        save_bundle(bundle, path)
        doc = path.read_text().replace('"n_unsafe": 6', '"n_unsafe": 7')
        path.write_text(doc)
        with pytest.raises(ArtifactError):
            load_bundle(path)
