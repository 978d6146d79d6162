import math

import numpy as np
import pytest

from almrl.market import (
    DivergedEpisode,
    MarketModel,
    ObjectiveSpec,
    Trajectory,
    X_MAX,
    classical_gain,
    classical_lambda,
    classical_value,
    diffusion,
    drift,
    episode_reward,
    euler_step,
    gaussian_entropy,
    monte_carlo_policy_rewards,
    simulate_episode,
)
from almrl.rng import SeedSpec, derive_stream


def _objective(Q=1.0, H=1.0, T=1.0, dt=0.01, x0=1.0):
    return ObjectiveSpec(Q=Q, H=H, T=T, dt=dt, x0=x0)


class TestModelAndObjective:
    def test_zero_d_rejected(self):
        with pytest.raises(ValueError):
            MarketModel(A=0.0, B=0.1, C=0.1, D=0.0)

    def test_horizon_not_on_grid_rejected(self):
        with pytest.raises(ValueError):
            ObjectiveSpec(Q=1, H=1, T=1.0, dt=0.3, x0=1)

    def test_horizon_normalized_to_grid(self):
        # 0.1 + ... accumulates representation error well below the tolerance
        obj = ObjectiveSpec(Q=1, H=1, T=0.30000000000000004, dt=0.1, x0=1)
        assert obj.n_steps == 3
        assert obj.T == 3 * 0.1

    def test_degenerate_horizon_rejected(self):
        with pytest.raises(ValueError):
            ObjectiveSpec(Q=1, H=1, T=1e-9, dt=0.01, x0=1)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            ObjectiveSpec(Q=-1, H=1, T=1, dt=0.01, x0=1)


class TestDynamics:
    def test_drift_zero_coefficients(self):
        assert drift(MarketModel(0, 0.1, 0.1, 0.1), 5, 5) == 0.5

    def test_drift_value(self):
        assert drift(MarketModel(0.05, 0.1, 0.1, 0.1), 1, 2) == pytest.approx(0.25)
        assert drift(MarketModel(-0.05, 0.1, 0.1, 0.1), 2, 1) == pytest.approx(0.0)

    def test_diffusion_value(self):
        assert diffusion(MarketModel(0, 0.1, 0.1, 0.2), 1, 1) == pytest.approx(0.3)
        assert diffusion(MarketModel(0, 0.1, 0.2, 0.1), 1, -2) == pytest.approx(0.0)

    def test_diffusion_is_signed(self):
        assert diffusion(MarketModel(0, 0.1, 0.1, 0.2), -1, -1) == pytest.approx(-0.3)

    def test_euler_step_no_motion(self):
        m = MarketModel(0.0, 0.0, 0.1, 0.1)
        assert euler_step(m, 1.0, 0.0, 0.01, 0.0) == 1.0

    def test_euler_step_values(self):
        m = MarketModel(0.05, 0.1, 0.1, 0.1)
        assert euler_step(m, 1, 1, 1.0, 1.0) == pytest.approx(1.35)
        m = MarketModel(0.0, 1.0, 0.0, 1.0)
        assert euler_step(m, 0, 1, 0.25, -1.0) == pytest.approx(-0.25)

    def test_euler_step_requires_positive_dt(self):
        with pytest.raises(ValueError):
            euler_step(MarketModel(0, 0.1, 0.1, 0.1), 1, 0, 0.0, 0.0)

    def test_deterministic_compounding_matches_exponential(self):
        # C = 0 and u = 0: x(T) = x0*(1 + A*dt)^K -> x0*exp(A*T)
        m = MarketModel(0.05, 0.1, 0.0, 0.1)
        obj = _objective(dt=1e-4)
        x = obj.x0
        for _ in range(obj.n_steps):
            x = euler_step(m, x, 0.0, obj.dt, 0.0)
        assert abs(x - math.exp(0.05)) / math.exp(0.05) < 1e-3


class TestSimulateEpisode:
    def test_frozen_dynamics(self):
        # C = 0 and u = 0 removes control and noise influence entirely
        m = MarketModel(0.0, 0.1, 0.0, 0.1)
        obj = _objective(dt=0.1)
        traj = simulate_episode(m, obj, lambda t, x: 0.0, derive_stream(SeedSpec(0)))
        assert np.all(traj.states == obj.x0)
        assert len(traj.states) == obj.n_steps + 1

    def test_deterministic_repeat(self):
        m = MarketModel(0.02, 0.1, 0.15, 0.15)
        obj = _objective()
        t1 = simulate_episode(m, obj, lambda t, x: -2 * x, derive_stream(SeedSpec(3)))
        t2 = simulate_episode(m, obj, lambda t, x: -2 * x, derive_stream(SeedSpec(3)))
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.actions, t2.actions)
        assert np.array_equal(t1.noises, t2.noises)

    def test_divergence_clamps_and_truncates(self):
        m = MarketModel(0.0, 1.0, 0.0, 1.0)
        obj = _objective(dt=0.5, T=10.0)
        with pytest.raises(DivergedEpisode) as exc:
            simulate_episode(m, obj, lambda t, x: 1e13, derive_stream(SeedSpec(0)))
        traj = exc.value.trajectory
        assert abs(traj.states[-1]) == X_MAX
        assert len(traj.states) < obj.n_steps + 1
        assert len(traj.actions) == len(traj.states) - 1

    def test_trajectory_length_invariant(self):
        with pytest.raises(ValueError):
            Trajectory(
                times=np.zeros(3), states=np.zeros(3),
                actions=np.zeros(3), noises=np.zeros(2),
            )


class TestEpisodeReward:
    def test_zero_states(self):
        obj = _objective(dt=0.5)
        traj = Trajectory(np.arange(3) * 0.5, np.zeros(3), np.zeros(2), np.zeros(2))
        assert episode_reward(traj, obj) == 0.0

    def test_constant_states_hand_value(self):
        obj = _objective(dt=0.5)
        traj = Trajectory(np.arange(3) * 0.5, np.ones(3), np.zeros(2), np.zeros(2))
        assert episode_reward(traj, obj) == pytest.approx(-1.0)

    def test_running_cost_off(self):
        obj = _objective(Q=0.0, H=2.0, dt=0.5)
        traj = Trajectory(np.arange(3) * 0.5, np.ones(3), np.zeros(2), np.zeros(2))
        assert episode_reward(traj, obj) == pytest.approx(-1.0)

    def test_independent_of_noise_field(self):
        obj = _objective(dt=0.5)
        states = np.array([1.0, 0.3, -0.2])
        a = Trajectory(np.arange(3) * 0.5, states, np.zeros(2), np.zeros(2))
        b = Trajectory(np.arange(3) * 0.5, states, np.zeros(2), np.ones(2))
        assert episode_reward(a, obj) == episode_reward(b, obj)


class TestClassicalSolution:
    def test_lambda_values(self):
        assert classical_lambda(MarketModel(0, 1, 0, 1)) == pytest.approx(1.0)
        assert classical_lambda(MarketModel(0, 0.1, 0.1, 0.1)) == pytest.approx(1.2)
        assert classical_lambda(MarketModel(0.05, 0.1, 0.15, 0.15)) == pytest.approx(
            0.0122500 / 0.0225, rel=1e-12
        )

    def test_gain_values(self):
        assert classical_gain(MarketModel(0, 1, 0, 1)) == pytest.approx(-1.0)
        assert classical_gain(MarketModel(0, 0.1, 0.15, 0.15)) == pytest.approx(
            -0.1225 / 0.0225, rel=1e-12
        )
        assert classical_gain(MarketModel(0, 0.05, 0.1, 0.2)) == pytest.approx(-1.75)

    def test_value_at_zero_state(self):
        m = MarketModel(0, 0.1, 0.1, 0.1)
        assert classical_value(m, _objective(), 0.3, 0.0) == 0.0

    def test_terminal_boundary(self):
        m = MarketModel(0.03, 0.12, 0.17, 0.11)
        obj = _objective()
        for x in (-2.0, 0.5, 2.0):
            assert classical_value(m, obj, obj.T, x) == pytest.approx(
                -0.5 * obj.H * x * x, rel=1e-14
            )

    def test_reference_value(self):
        m = MarketModel(0, 0.1, 0.1, 0.1)
        v = classical_value(m, _objective(), 0.0, 1.0)
        expected = -0.5 * (1 / 1.2 + (1 - 1 / 1.2) * math.exp(-1.2))
        assert v == pytest.approx(expected, rel=1e-12)
        assert v == pytest.approx(-0.44177, abs=1e-5)

    def test_small_lambda_limit(self):
        # B^2 + 2BCD = 2AD^2 makes the exponential rate exactly zero
        b, c, d = 0.1, 0.1, 0.1
        a = (b * b + 2 * b * c * d) / (2 * d * d)
        m = MarketModel(a, b, c, d)
        assert abs(classical_lambda(m)) < 1e-12
        obj = _objective()
        assert classical_value(m, obj, 0.25, 2.0) == pytest.approx(
            -0.5 * (1.0 * 0.75 + 1.0) * 4.0
        )


class TestEntropy:
    def test_zero_point(self):
        assert gaussian_entropy(1.0 / (2 * math.pi * math.e)) == pytest.approx(0.0)

    def test_unit_variance(self):
        assert gaussian_entropy(1.0) == pytest.approx(1.4189385332046727)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            gaussian_entropy(0.0)


class TestStepStatistics:
    def test_martingale_noise_moments(self):
        m = MarketModel(0.02, 0.1, 0.15, 0.15)
        x, u, dt = 1.3, -2.0, 0.01
        stream = derive_stream(SeedSpec(11))
        n = 10**5
        z = stream.standard_normal(n)
        inc = (
            drift(m, x, u) * dt + diffusion(m, x, u) * math.sqrt(dt) * z
        )
        noise = inc - drift(m, x, u) * dt
        se = noise.std() / math.sqrt(n)
        assert abs(noise.mean()) < 4 * se
        assert abs(noise.var() - diffusion(m, x, u) ** 2 * dt) < 0.02 * (
            diffusion(m, x, u) ** 2 * dt
        )


def test_monte_carlo_matches_simulate_episode():
    m = MarketModel(0.02, 0.1, 0.15, 0.15)
    obj = _objective(dt=0.1)
    gain = classical_gain(m)
    r = monte_carlo_policy_rewards(m, obj, gain, 0.0, 5, derive_stream(SeedSpec(9)))
    ref_stream = derive_stream(SeedSpec(9))
    for k in range(5):
        traj = simulate_episode(m, obj, lambda t, x: gain * x, ref_stream)
        assert r[k] == pytest.approx(episode_reward(traj, obj), rel=1e-12)
