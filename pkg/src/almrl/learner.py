"""Model-free continuous-time soft actor-critic for the LQ surplus problem.

Critic: J(t, x; theta) = -1/2*k1(t)*x^2 + k3(t) with
k1(t) = theta1 + (H - theta1)*exp(theta2*(t - T)) (clamped below at k_floor)
and k3(t) = theta3*(T - t), so the terminal boundary J(T, x) = -1/2*H*x^2
holds by construction. Actor: Gaussian N(phi1*x, phi2).

Each training episode collects one trajectory under the current policy, then
applies the discretized TD update for theta and the policy-gradient updates for
phi1 and phi2, all from the same pre-update parameter snapshot, followed by
Euclidean projection onto the parameter boxes/balls. The temperature gamma_n
and the learning rate a_n follow fixed power-law schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from almrl import backend
from almrl.market import (
    MarketModel,
    ObjectiveSpec,
    Trajectory,
    gaussian_entropy,
)
from almrl.results import RunResult
from almrl.rng import next_standard_normal, standard_normals

DEFAULT_K_FLOOR = 1e-4


@dataclass
class CriticParams:
    theta1: float  # asymptotic value coefficient (role of Q/Lambda)
    theta2: float  # exponential rate (role of Lambda)
    theta3: float  # slope of the time-linear offset k3

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    @staticmethod
    def from_array(v) -> "CriticParams":
        return CriticParams(float(v[0]), float(v[1]), float(v[2]))


@dataclass
class PolicyParams:
    phi1: float  # mean gain
    phi2: float  # policy variance (> 0)


@dataclass(frozen=True)
class Schedules:
    """Power-law schedules for the temperature and the learning rate.

    gamma(n) = c_gamma / (n+1)**b_exponent and a(n) = lr_scale*(n+1)**lr_exponent.
    The defaults satisfy sum a_n = inf, sum a_n^2 < inf and b_n -> inf.
    lr_scale/lr_exponent exist so fixed step sizes can be expressed in tests.
    """

    c_gamma: float = 1.0
    b_exponent: float = 0.25
    lr_exponent: float = -0.75
    lr_scale: float = 1.0


@dataclass(frozen=True)
class ProjectionBounds:
    u_theta: float = 100.0
    u1: float = 100.0
    u2: float = 100.0
    epsilon: float = 0.01


@dataclass
class LearnerState:
    n: int
    theta: CriticParams
    phi: PolicyParams
    schedules: Schedules
    bounds: ProjectionBounds
    reward_history: list = field(default_factory=list)
    k_floor: float = DEFAULT_K_FLOOR


def gamma_schedule(n: int, schedules: Schedules) -> float:
    """Critic temperature gamma_n = c_gamma / (n+1)**b_exponent."""
    return schedules.c_gamma / (n + 1) ** schedules.b_exponent


def learning_rate(n: int, schedules: Schedules = Schedules()) -> float:
    """Step size a_n = lr_scale * (n+1)**lr_exponent."""
    return schedules.lr_scale * (n + 1) ** schedules.lr_exponent


def k1(t: float, theta: CriticParams, objective: ObjectiveSpec,
       k_floor: float = DEFAULT_K_FLOOR) -> float:
    """Quadratic-coefficient curve of the critic, clamped below at k_floor."""
    raw = theta.theta1 + (objective.H - theta.theta1) * math.exp(
        theta.theta2 * (t - objective.T)
    )
    return max(raw, k_floor)


def k3(t: float, theta: CriticParams, objective: ObjectiveSpec) -> float:
    """Offset curve theta3*(T - t); zero at the terminal time."""
    return theta.theta3 * (objective.T - t)


def critic_value(t: float, x: float, theta: CriticParams, objective: ObjectiveSpec,
                 k_floor: float = DEFAULT_K_FLOOR) -> float:
    return -0.5 * k1(t, theta, objective, k_floor) * x * x + k3(t, theta, objective)


def critic_grad(t: float, x: float, theta: CriticParams, objective: ObjectiveSpec,
                k_floor: float = DEFAULT_K_FLOOR) -> tuple[float, float, float]:
    """(dJ/dtheta1, dJ/dtheta2, dJ/dtheta3).

    Where the k_floor clamp is active the theta1/theta2 components are defined
    as zero.
    """
    T, H = objective.T, objective.H
    e = math.exp(theta.theta2 * (t - T))
    raw = theta.theta1 + (H - theta.theta1) * e
    if raw < k_floor:
        return 0.0, 0.0, T - t
    g1 = -0.5 * x * x * (1.0 - e)
    g2 = -0.5 * x * x * (H - theta.theta1) * (t - T) * e
    return g1, g2, T - t


def sample_action(x: float, phi: PolicyParams, stream: np.random.Generator) -> float:
    """Draw u ~ N(phi1*x, phi2)."""
    return phi.phi1 * x + math.sqrt(phi.phi2) * next_standard_normal(stream)


def project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm <= radius:
        return v
    return v * (radius / norm)


def project_interval(s: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise ValueError("empty interval")
    return min(max(s, lo), hi)


def _episode_sums(traj: Trajectory, state: LearnerState, objective: ObjectiveSpec):
    theta, phi = state.theta, state.phi
    gamma_n = gamma_schedule(state.n, state.schedules)
    return backend.update_sums(
        np.ascontiguousarray(traj.states),
        np.ascontiguousarray(traj.actions),
        len(traj.actions),
        objective.dt,
        objective.T,
        objective.Q,
        objective.H,
        theta.theta1,
        theta.theta2,
        theta.theta3,
        phi.phi1,
        phi.phi2,
        gamma_n,
        gaussian_entropy(phi.phi2),
        state.k_floor,
    )


def update_theta(traj: Trajectory, state: LearnerState,
                 objective: ObjectiveSpec) -> CriticParams:
    """Projected TD update of the critic parameters."""
    g1, g2, g3, _, _ = _episode_sums(traj, state, objective)
    a_n = learning_rate(state.n, state.schedules)
    new = state.theta.as_array() + a_n * np.array([g1, g2, g3])
    return CriticParams.from_array(project_ball(new, state.bounds.u_theta))


def phi1_increment(traj: Trajectory, state: LearnerState,
                   objective: ObjectiveSpec) -> float:
    """Raw phi1 policy-gradient increment, before learning rate and projection."""
    _, _, _, z1, _ = _episode_sums(traj, state, objective)
    return z1


def update_phi1(traj: Trajectory, state: LearnerState,
                objective: ObjectiveSpec) -> float:
    """Projected policy-gradient update of the mean gain."""
    z1 = phi1_increment(traj, state, objective)
    a_n = learning_rate(state.n, state.schedules)
    u1 = state.bounds.u1
    return project_interval(state.phi.phi1 + a_n * z1, -u1, u1)


def update_phi2(traj: Trajectory, state: LearnerState,
                objective: ObjectiveSpec) -> float:
    """Projected adaptive-exploration update of the policy variance."""
    _, _, _, _, z2 = _episode_sums(traj, state, objective)
    a_n = learning_rate(state.n, state.schedules)
    b = state.bounds
    return project_interval(state.phi.phi2 - a_n * z2, b.epsilon, b.u2)


@dataclass(frozen=True)
class AlmrlConfig:
    episodes: int
    schedules: Schedules = Schedules()
    bounds: ProjectionBounds = ProjectionBounds()
    phi2_init: float = 1.0
    k_floor: float = DEFAULT_K_FLOOR
    # Overrides for the standard-normal initialization (used by tests and the
    # drift-sign oracle).
    theta_init: Optional[tuple[float, float, float]] = None
    phi1_init: Optional[float] = None


class Streams(NamedTuple):
    env: np.random.Generator
    action: np.random.Generator


def init_state(config: AlmrlConfig, action_stream: np.random.Generator) -> LearnerState:
    """Standard-normal initialization of theta and phi1, then projection.

    theta1 takes its absolute value so the critic starts in the positive-k1
    region; phi2 starts at phi2_init.
    """
    if config.theta_init is not None:
        theta_v = np.array(config.theta_init, dtype=float)
    else:
        theta_v = standard_normals(action_stream, 3)
        theta_v[0] = abs(theta_v[0])
    theta = CriticParams.from_array(project_ball(theta_v, config.bounds.u_theta))
    if config.phi1_init is not None:
        phi1 = config.phi1_init
    else:
        phi1 = next_standard_normal(action_stream)
    phi1 = project_interval(phi1, -config.bounds.u1, config.bounds.u1)
    phi2 = project_interval(config.phi2_init, config.bounds.epsilon, config.bounds.u2)
    return LearnerState(
        n=0,
        theta=theta,
        phi=PolicyParams(phi1, phi2),
        schedules=config.schedules,
        bounds=config.bounds,
        k_floor=config.k_floor,
    )


def train(
    model: MarketModel,
    objective: ObjectiveSpec,
    config: AlmrlConfig,
    streams: Streams,
) -> RunResult:
    """Run the full actor-critic training loop for config.episodes episodes.

    Environment noise comes from streams.env (exactly n_steps draws per episode,
    independent of divergence), action noise and parameter initialization from
    streams.action. The three parameter updates of an episode are computed from
    the same pre-update snapshot. Diverged episodes are scored at the clamped
    state and training continues.
    """
    state = init_state(config, streams.action)
    k_steps = objective.n_steps
    dt = objective.dt
    states_buf = np.empty(k_steps + 1)
    actions_buf = np.empty(k_steps)
    rewards = np.empty(config.episodes)
    diverged_count = 0
    ent = gaussian_entropy
    for n in range(config.episodes):
        state.n = n
        z_env = standard_normals(streams.env, k_steps)
        z_act = standard_normals(streams.action, k_steps)
        theta, phi = state.theta, state.phi
        taken, diverged = backend.simulate_episode_arrays(
            model.A, model.B, model.C, model.D,
            objective.x0, dt, k_steps,
            backend.MODE_LINEAR, phi.phi1, math.sqrt(phi.phi2), 0.0,
            z_act, z_env, states_buf, actions_buf,
        )
        if diverged:
            diverged_count += 1
        rewards[n] = backend.reward_from_states(states_buf, taken, objective.Q,
                                                objective.H, dt)
        gamma_n = gamma_schedule(n, state.schedules)
        a_n = learning_rate(n, state.schedules)
        g1, g2, g3, z1, z2 = backend.update_sums(
            states_buf, actions_buf, taken, dt, objective.T,
            objective.Q, objective.H,
            theta.theta1, theta.theta2, theta.theta3,
            phi.phi1, phi.phi2,
            gamma_n, ent(phi.phi2), state.k_floor,
        )
        new_theta = project_ball(theta.as_array() + a_n * np.array([g1, g2, g3]),
                                 state.bounds.u_theta)
        new_phi1 = project_interval(phi.phi1 + a_n * z1,
                                    -state.bounds.u1, state.bounds.u1)
        new_phi2 = project_interval(phi.phi2 - a_n * z2,
                                    state.bounds.epsilon, state.bounds.u2)
        state.theta = CriticParams.from_array(new_theta)
        state.phi = PolicyParams(new_phi1, new_phi2)
        state.reward_history.append(rewards[n])
    return RunResult(
        method="ALMRL",
        rewards=rewards,
        final_params={
            "theta1": state.theta.theta1,
            "theta2": state.theta.theta2,
            "theta3": state.theta.theta3,
            "phi1": state.phi.phi1,
            "phi2": state.phi.phi2,
        },
        diverged_episodes=diverged_count,
    )
