"""Surplus-deviation market environment and closed-form classical control.

The scalar state x follows dx = (A x + B u) dt + (C x + D u) dW, the episode
reward is the discretized quadratic objective, and the classical full-knowledge
solution (value function, optimal gain) serves as the oracle against which the
learned policy is checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from almrl import backend

# State magnitude beyond which an episode is declared diverged and stopped.
X_MAX = backend.X_MAX

# Below this |Lambda| the classical value function switches to its analytic
# Lambda -> 0 limit (removable singularity).
LAMBDA_TINY = 1e-12


class DivergedEpisode(RuntimeError):
    """Raised when |x| exceeds X_MAX; carries the truncated trajectory.

    The final state of the partial trajectory is clamped to +/-X_MAX so the
    caller can still score the episode (running cost up to divergence plus the
    terminal penalty at the clamped state).
    """

    def __init__(self, trajectory: "Trajectory"):
        super().__init__("episode diverged: |x| exceeded %g" % X_MAX)
        self.trajectory = trajectory


@dataclass(frozen=True)
class MarketModel:
    """Environment coefficients, unknown to the learning agent."""

    A: float  # internal drift rate
    B: float  # control-to-drift gain
    C: float  # state-to-volatility gain
    D: float  # control-to-volatility gain

    def __post_init__(self):
        if self.D == 0.0:
            raise ValueError("D must be nonzero")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Agent-known cost weights and time grid.

    T is normalized to the nearest grid multiple of dt; a relative adjustment
    above 1e-9 is rejected so the number of steps is exact by construction.
    """

    Q: float
    H: float
    T: float
    dt: float
    x0: float

    def __post_init__(self):
        if self.Q < 0 or self.H < 0:
            raise ValueError("Q and H must be nonnegative")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("T and dt must be positive")
        k = round(self.T / self.dt)
        if k < 1:
            raise ValueError("horizon shorter than one step")
        t_adj = k * self.dt
        if abs(t_adj - self.T) > 1e-9 * self.T:
            raise ValueError(
                f"T={self.T} is not a multiple of dt={self.dt} "
                f"(nearest grid value {t_adj})"
            )
        object.__setattr__(self, "T", t_adj)

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)


@dataclass
class Trajectory:
    """One episode: time grid, states, actions and the noise draws used."""

    times: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    noises: np.ndarray

    def __post_init__(self):
        n = len(self.states)
        if not (len(self.times) == n == len(self.actions) + 1 == len(self.noises) + 1):
            raise ValueError("inconsistent trajectory array lengths")


def drift(model: MarketModel, x: float, u: float) -> float:
    """Instantaneous drift A*x + B*u."""
    return model.A * x + model.B * u


def diffusion(model: MarketModel, x: float, u: float) -> float:
    """Signed volatility C*x + D*u (squared only inside expectations)."""
    return model.C * x + model.D * u


def euler_step(model: MarketModel, x: float, u: float, dt: float, z: float) -> float:
    """One Euler-Maruyama step with standard-normal draw z."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return x + drift(model, x, u) * dt + diffusion(model, x, u) * math.sqrt(dt) * z


def simulate_episode(
    model: MarketModel,
    objective: ObjectiveSpec,
    strategy: Callable[[float, float], float],
    stream: np.random.Generator,
) -> Trajectory:
    """Roll out one episode; strategy maps (t, x) to an action.

    All n_steps noise draws are consumed from ``stream`` up front, so stream
    consumption does not depend on whether the episode diverges. Raises
    DivergedEpisode (carrying the clamped partial trajectory) if |x| exceeds
    X_MAX.
    """
    from almrl.rng import standard_normals

    k_max = objective.n_steps
    dt = objective.dt
    z = standard_normals(stream, k_max)
    times = np.arange(k_max + 1) * dt
    states = np.empty(k_max + 1)
    actions = np.empty(k_max)
    x = objective.x0
    states[0] = x
    for k in range(k_max):
        u = strategy(times[k], x)
        actions[k] = u
        x = euler_step(model, x, u, dt, z[k])
        if not (-X_MAX < x < X_MAX):
            x = X_MAX if x > 0 else -X_MAX
            states[k + 1] = x
            raise DivergedEpisode(
                Trajectory(times[: k + 2], states[: k + 2], actions[: k + 1], z[: k + 1])
            )
        states[k + 1] = x
    return Trajectory(times, states, actions, z)


def episode_reward(traj: Trajectory, objective: ObjectiveSpec) -> float:
    """Discretized quadratic objective of one (possibly truncated) episode."""
    x = traj.states
    running = float(np.dot(x[:-1], x[:-1]))
    return -0.5 * objective.Q * running * objective.dt - 0.5 * objective.H * float(x[-1]) ** 2


def classical_lambda(model: MarketModel) -> float:
    """The exponential rate of the classical value function."""
    d2 = model.D**2
    return (model.B**2 + 2 * model.B * model.C * model.D - 2 * model.A * d2) / d2


def classical_value(
    model: MarketModel, objective: ObjectiveSpec, t: float, x: float
) -> float:
    """Full-knowledge optimal value V(t, x).

    For |Lambda| < LAMBDA_TINY the analytic limit -1/2*(Q*(T-t) + H)*x^2 is
    used (continuous extension of the removable singularity).
    """
    lam = classical_lambda(model)
    T, Q, H = objective.T, objective.Q, objective.H
    if abs(lam) < LAMBDA_TINY:
        return -0.5 * (Q * (T - t) + H) * x * x
    return -0.5 * (Q / lam + (H - Q / lam) * math.exp(lam * (t - T))) * x * x


def classical_gain(model: MarketModel) -> float:
    """Optimal proportional gain -(B + C*D)/D^2 of the classical policy."""
    return -(model.B + model.C * model.D) / model.D**2


def gaussian_entropy(variance: float) -> float:
    """Differential entropy of a Gaussian with the given variance."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    return 0.5 * math.log(2.0 * math.pi * math.e * variance)


def monte_carlo_policy_rewards(
    model: MarketModel,
    objective: ObjectiveSpec,
    gain: float,
    noise_std: float,
    episodes: int,
    stream: np.random.Generator,
    batch: int = 20000,
) -> np.ndarray:
    """Episode rewards under u = gain*x + noise_std*z over many episodes.

    Batched Monte Carlo evaluation helper built on the kernel backend; used for
    oracle-value checks and policy evaluation, not for training.
    """
    from almrl.rng import standard_normals

    k = objective.n_steps
    out = np.empty(episodes)
    done = 0
    while done < episodes:
        m = min(batch, episodes - done)
        z_env = standard_normals(stream, (m, k))
        z_act = standard_normals(stream, (m, k)) if noise_std != 0.0 else None
        backend.simulate_linear_batch(
            model.A,
            model.B,
            model.C,
            model.D,
            objective.x0,
            objective.dt,
            k,
            objective.Q,
            objective.H,
            gain,
            noise_std,
            z_act,
            z_env,
            out[done : done + m],
        )
        done += m
    return out
