import numpy as np
import pytest
from hypothesis import given, strategies as st

from aeromon.config import PlantConfig
from aeromon.errors import ConfigurationError, SimulationDivergedError
from aeromon.plant import (
    NY,
    AircraftParams,
    ControllerGains,
    DoubletScript,
    PilotCommand,
    Trajectory,
    doublet_command,
    failure_time,
    plant_from_config,
    sample_params,
    simulate_rollout,
    step,
)

ZERO_GAINS = ControllerGains(K=np.zeros((2, 3)))


def default_plant():
    return plant_from_config(PlantConfig())


def taylor_expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by Taylor series, run to machine convergence."""
    term = np.eye(A.shape[0])
    total = term.copy()
    for n in range(1, 200):
        term = term @ A / n
        total_next = total + term
        if np.allclose(total_next, total, rtol=0, atol=1e-300) or np.max(np.abs(term)) < 1e-20:
            return total_next
        total = total_next
    return total


def random_stable_system(gen: np.random.Generator) -> np.ndarray:
    """Random diagonalizable stable 3x3 with eigenvalues at the plant's scale.

    One real mode plus a complex pair, conjugated by a well-conditioned
    similarity, like a lateral-directional loop (roll subsidence + Dutch roll).
    """
    real_pole = gen.uniform(-3.0, -0.2)
    omega = gen.uniform(0.5, 2.5)
    zeta = gen.uniform(0.1, 0.9)
    re = -zeta * omega
    im = omega * np.sqrt(1.0 - zeta ** 2)
    block = np.array([
        [real_pole, 0.0, 0.0],
        [0.0, re, im],
        [0.0, -im, re],
    ])
    while True:
        T = gen.normal(size=(3, 3))
        if np.linalg.cond(T) < 10.0:
            break
    return T @ block @ np.linalg.inv(T)


class TestSampleParams:
    def test_zero_perturbation_is_identity(self):
        nominal, _, _ = default_plant()
        sampled = sample_params(nominal, 0.0, seed=99)
        np.testing.assert_array_equal(sampled.A, nominal.A)
        np.testing.assert_array_equal(sampled.B, nominal.B)
        np.testing.assert_array_equal(sampled.C, nominal.C)
        np.testing.assert_array_equal(sampled.D, nominal.D)

    def test_deterministic_given_seed(self):
        nominal, _, _ = default_plant()
        first = sample_params(nominal, 0.3, seed=7)
        second = sample_params(nominal, 0.3, seed=7)
        np.testing.assert_array_equal(first.A, second.A)
        np.testing.assert_array_equal(first.B, second.B)

    def test_empirical_mean_matches_nominal(self):
        # Uniform factors in [0.7, 1.3] average to 1, so over many draws each
        # perturbed entry's mean lands within 1% of the nominal entry.
        nominal, _, _ = default_plant()
        acc_a = np.zeros_like(nominal.A)
        acc_b = np.zeros_like(nominal.B)
        n = 10_000
        for i in range(n):
            sampled = sample_params(nominal, 0.3, seed=i)
            acc_a += sampled.A
            acc_b += sampled.B
        nonzero_a = nominal.A != 0
        nonzero_b = nominal.B != 0
        rel_a = np.abs(acc_a / n - nominal.A)[nonzero_a] / np.abs(nominal.A[nonzero_a])
        rel_b = np.abs(acc_b / n - nominal.B)[nonzero_b] / np.abs(nominal.B[nonzero_b])
        assert rel_a.max() < 0.01
        assert rel_b.max() < 0.01

    def test_ny_row_recomputed_from_perturbed_matrices(self):
        nominal, _, _ = default_plant()
        sampled = sample_params(nominal, 0.3, seed=1)
        ratio = nominal.V / nominal.g
        np.testing.assert_allclose(
            sampled.C[NY], ratio * (sampled.A[0] + np.array([0.0, 0.0, 1.0])), rtol=1e-15)
        np.testing.assert_allclose(sampled.D[NY], ratio * sampled.B[0], rtol=1e-15)

    def test_rejects_bad_fraction(self):
        nominal, _, _ = default_plant()
        with pytest.raises(ValueError):
            sample_params(nominal, 1.0, seed=0)

    def test_rejects_non_finite_nominal(self):
        bad = np.array([[np.nan, 0, 0], [0, 0, 0], [0, 0, 0]])
        with pytest.raises(ConfigurationError):
            AircraftParams.from_core(bad, np.zeros((3, 2)), 100.0, 9.81)


class TestDoubletCommand:
    SCRIPT = DoubletScript(start=0.5, magnitude=1.0)

    def test_first_pulse_positive(self):
        cmd = doublet_command(self.SCRIPT.start + 0.1, self.SCRIPT)
        assert (cmd.aileron, cmd.rudder) == (0.0, 1.0)

    def test_second_pulse_negative(self):
        cmd = doublet_command(self.SCRIPT.start + 1.5, self.SCRIPT)
        assert (cmd.aileron, cmd.rudder) == (0.0, -1.0)

    def test_after_doublet_centered(self):
        cmd = doublet_command(self.SCRIPT.start + 2.5, self.SCRIPT)
        assert (cmd.aileron, cmd.rudder) == (0.0, 0.0)

    def test_before_start_centered(self):
        cmd = doublet_command(0.0, self.SCRIPT)
        assert (cmd.aileron, cmd.rudder) == (0.0, 0.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            doublet_command(-0.1, self.SCRIPT)


class TestStep:
    def test_null_dynamics_keeps_state(self):
        params = AircraftParams.from_core(np.zeros((3, 3)), np.zeros((3, 2)), 100.0, 9.81)
        x = np.array([0.3, -0.2, 0.1])
        x_next, _ = step(params, ZERO_GAINS, x, PilotCommand(0.5, -0.5), dt=0.05)
        np.testing.assert_array_equal(x_next, x)

    def test_decoupled_scalar_matches_exponential(self):
        A = np.diag([-1.0, 0.0, 0.0])
        params = AircraftParams.from_core(A, np.zeros((3, 2)), 100.0, 9.81)
        x_next, _ = step(params, ZERO_GAINS, np.array([1.0, 0.0, 0.0]),
                         PilotCommand(0.0, 0.0), dt=0.05)
        assert abs(x_next[0] - 0.951229) < 1e-6

    def test_homogeneity_doubling_exact(self):
        nominal, gains, _ = default_plant()
        x = np.array([0.02, -0.1, 0.05])
        once, _ = step(nominal, gains, x, PilotCommand(0.0, 0.0), dt=0.05)
        twice, _ = step(nominal, gains, 2.0 * x, PilotCommand(0.0, 0.0), dt=0.05)
        np.testing.assert_allclose(twice, 2.0 * once, rtol=0, atol=1e-12)

    @given(st.integers(min_value=0, max_value=10_000))
    def test_superposition(self, seed):
        nominal, gains, _ = default_plant()
        gen = np.random.default_rng(seed)
        x1 = gen.normal(size=3) * 0.1
        x2 = gen.normal(size=3) * 0.1
        cmd = PilotCommand(0.0, 0.0)
        lhs, _ = step(nominal, gains, x1 + x2, cmd, dt=0.05)
        r1, _ = step(nominal, gains, x1, cmd, dt=0.05)
        r2, _ = step(nominal, gains, x2, cmd, dt=0.05)
        np.testing.assert_allclose(lhs, r1 + r2, rtol=0, atol=1e-12)

    def test_rk4_matches_taylor_exponential_at_plant_scale(self):
        # Free response: one dt with 5 substeps against the series oracle.
        gen = np.random.default_rng(42)
        dt = 0.05
        for _ in range(30):
            A = random_stable_system(gen)
            params = AircraftParams.from_core(A, np.zeros((3, 2)), 100.0, 9.81)
            x0 = gen.normal(size=3)
            x_rk4, _ = step(params, ZERO_GAINS, x0, PilotCommand(0.0, 0.0), dt)
            x_exact = taylor_expm(A * dt) @ x0
            assert np.max(np.abs(x_rk4 - x_exact)) < 1e-8

    def test_rk4_large_eigenvalues_need_more_substeps(self):
        # |lambda| = 20 exceeds what 5 substeps can deliver at 1e-8; 32 can.
        A = np.diag([-20.0, -15.0, -10.0])
        params = AircraftParams.from_core(A, np.zeros((3, 2)), 100.0, 9.81)
        x0 = np.ones(3)
        exact = taylor_expm(A * 0.05) @ x0
        coarse, _ = step(params, ZERO_GAINS, x0, PilotCommand(0.0, 0.0), 0.05, substeps=5)
        fine, _ = step(params, ZERO_GAINS, x0, PilotCommand(0.0, 0.0), 0.05, substeps=32)
        assert np.max(np.abs(coarse - exact)) > 1e-8
        assert np.max(np.abs(fine - exact)) < 1e-8

    def test_non_finite_input_rejected(self):
        nominal, gains, _ = default_plant()
        with pytest.raises(ValueError):
            step(nominal, gains, np.array([np.nan, 0, 0]), PilotCommand(0, 0), 0.05)


class TestOutputs:
    def test_ny_consistent_with_state_derivative(self):
        config = PlantConfig()
        nominal, gains, script = plant_from_config(config)
        params = sample_params(nominal, 0.3, seed=5)
        traj = simulate_rollout(params, gains, script, config.horizon, config.dt)
        closed = params.A - params.B @ gains.K
        for i in range(1, len(traj)):
            cmd = script.command((i - 1) * config.dt).as_array()
            x = traj.outputs[i, :3]
            beta_dot = (closed @ x + params.B @ cmd)[0]
            expected = (params.V / params.g) * (beta_dot + x[2])
            assert abs(traj.outputs[i, NY] - expected) < 1e-9

    def test_outputs_echo_applied_controls(self):
        config = PlantConfig()
        nominal, gains, script = plant_from_config(config)
        params = sample_params(nominal, 0.3, seed=6)
        x = np.array([0.01, -0.05, 0.02])
        cmd = PilotCommand(0.1, -0.2)
        x_next, y = step(params, gains, x, cmd, config.dt)
        applied = cmd.as_array() - gains.K @ x_next
        np.testing.assert_array_equal(y[4:], applied)


class TestSimulateRollout:
    def test_zero_command_stays_at_equilibrium(self):
        nominal, gains, _ = default_plant()
        quiet = DoubletScript(start=0.5, magnitude=0.0)
        traj = simulate_rollout(nominal, gains, quiet, horizon=5.0, dt=0.05)
        assert np.all(traj.outputs == 0.0)
        assert traj.failure_index is None

    def test_output_count_includes_initial_sample(self):
        nominal, gains, script = default_plant()
        traj = simulate_rollout(nominal, gains, script, horizon=5.0, dt=0.05)
        assert len(traj) == 101

    def test_repeat_runs_bit_identical(self):
        config = PlantConfig()
        nominal, gains, script = plant_from_config(config)
        params = sample_params(nominal, 0.3, seed=11)
        a = simulate_rollout(params, gains, script, config.horizon, config.dt)
        b = simulate_rollout(params, gains, script, config.horizon, config.dt)
        assert a.outputs.tobytes() == b.outputs.tobytes()
        assert a.failure_index == b.failure_index

    def test_runs_full_horizon_despite_failure(self):
        config = PlantConfig()
        nominal, gains, script = plant_from_config(config)
        # Hunt for an unsafe draw; the default scenario yields ~15%.
        for seed in range(60):
            params = sample_params(nominal, config.perturbation, seed)
            traj = simulate_rollout(params, gains, script, config.horizon,
                                    config.dt, limit=config.ny_limit)
            if traj.is_unsafe:
                assert len(traj) == 101
                assert traj.failure_index < 101
                return
        pytest.fail("no unsafe rollout found in 60 draws")

    def test_divergence_carries_step_index(self):
        # Violent instability driven by the doublet overflows to inf mid-run.
        unstable = AircraftParams.from_core(np.eye(3) * 400.0, np.ones((3, 2)), 100.0, 9.81)
        script = DoubletScript(start=0.5, magnitude=1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(SimulationDivergedError) as exc:
                simulate_rollout(unstable, ZERO_GAINS, script, horizon=5.0, dt=0.05)
        assert exc.value.step_index is not None
        assert 0 < exc.value.step_index <= 101


class TestFailureTime:
    def _traj(self, ny_values):
        outputs = np.zeros((len(ny_values), 6))
        outputs[:, NY] = ny_values
        return Trajectory(dt=0.05, outputs=outputs)

    def test_first_crossing(self):
        assert failure_time(self._traj([0.1, 0.3, 0.6]), 0.5) == 2

    def test_no_crossing(self):
        assert failure_time(self._traj([0.1, 0.2, 0.3]), 0.5) is None

    def test_boundary_is_inclusive(self):
        assert failure_time(self._traj([0.1, 0.2, 0.3, 0.4, 0.5, 0.7]), 0.5) == 4

    def test_negative_ny_counts(self):
        assert failure_time(self._traj([0.0, -0.6]), 0.5) == 1


class TestPlantConfig:
    def test_default_closed_loop_is_hurwitz(self):
        config = PlantConfig()
        config.validate()
        closed = np.asarray(config.A) - np.asarray(config.B) @ np.asarray(config.K)
        assert np.linalg.eigvals(closed).real.max() < 0.0

    def test_unstable_gains_rejected(self):
        config = PlantConfig()
        # Positive roll-rate feedback through the aileron destabilizes.
        config.K = [[0.0, -40.0, 0.0], [0.0, 0.0, 0.0]]
        closed = np.asarray(config.A) - np.asarray(config.B) @ np.asarray(config.K)
        assert np.linalg.eigvals(closed).real.max() > 0.0
        with pytest.raises(ConfigurationError, match="Hurwitz"):
            config.validate()

    def test_non_finite_matrix_rejected(self):
        config = PlantConfig()
        config.A[0][0] = float("inf")
        with pytest.raises(ConfigurationError):
            config.validate()

    def test_command_saturation_enforced(self):
        with pytest.raises(ValueError):
            PilotCommand(0.0, 2.0).validate(saturation=1.5)
