"""Pure-Python/NumPy fallback for the hot kernels.

Same call signatures and semantics as the compiled extension ``almrl._kernels``.
The per-episode simulator is a plain float loop (the state recurrence cannot be
vectorized in time); the update sums and the batch evaluator are vectorized with
NumPy. Results agree with the compiled backend up to floating-point summation
order.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

X_MAX = 1e12

MODE_LINEAR = 0
MODE_DEADBAND = 1


def simulate_episode_arrays(
    A, B, C, D, x0, dt, n_steps, mode, p1, p2, p3, z_act, z_env, states, actions
):
    """Simulate one episode in place.

    mode 0: u = p1*x + p2*z_act[k] (linear-Gaussian; p2 = 0 gives a
    deterministic proportional policy and z_act is not read).
    mode 1: u = -p1*sgn(x)*max(|x| - p3, 0) (deadband).

    Fills ``states[0..taken]`` and ``actions[0..taken-1]`` and returns
    ``(taken, diverged)``. On divergence the final state is clamped to
    +/-X_MAX and the episode stops.
    """
    x = float(x0)
    sd = math.sqrt(dt)
    use_act = mode == MODE_LINEAR and p2 != 0.0
    states[0] = x
    for k in range(n_steps):
        if mode == MODE_LINEAR:
            u = p1 * x
            if use_act:
                u += p2 * z_act[k]
        else:
            if x > p3:
                u = -p1 * (x - p3)
            elif x < -p3:
                u = -p1 * (x + p3)
            else:
                u = 0.0
        actions[k] = u
        x = x + (A * x + B * u) * dt + (C * x + D * u) * sd * z_env[k]
        if not (-X_MAX < x < X_MAX):
            x = X_MAX if x > 0 else -X_MAX
            states[k + 1] = x
            return k + 1, True
        states[k + 1] = x
    return n_steps, False


def reward_from_states(states, taken, Q, H, dt):
    """Running cost over the first ``taken`` states plus terminal penalty."""
    s = np.asarray(states)
    run = float(np.dot(s[:taken], s[:taken]))
    return -0.5 * Q * run * dt - 0.5 * H * float(s[taken]) ** 2


def update_sums(
    states,
    actions,
    taken,
    dt,
    T,
    Q,
    H,
    theta1,
    theta2,
    theta3,
    phi1,
    phi2,
    gamma_n,
    entropy,
    k_floor,
):
    """Per-episode sums feeding the three parameter updates.

    Returns ``(g1, g2, g3, z1, z2)``:
      g1..g3  critic-gradient-times-TD-bracket sums,
      z1      sum of (u - phi1*x)*x * bracket (the phi1 increment before the
              learning rate; the 1/phi2 score factor and the phi2 stabilizer
              cancel),
      z2      sum for the variance update, including the entropy bonus term.
    """
    x = np.asarray(states[: taken + 1])
    u = np.asarray(actions[:taken])
    t = np.arange(taken + 1) * dt
    e = np.exp(theta2 * (t - T))
    k1_raw = theta1 + (H - theta1) * e
    k1 = np.maximum(k1_raw, k_floor)
    J = -0.5 * k1 * x * x + theta3 * (T - t)
    x0 = x[:-1]
    bracket = (
        J[1:] - J[:-1] - 0.5 * Q * x0 * x0 * dt + gamma_n * entropy * dt
    )
    active = k1_raw[:-1] >= k_floor
    e0 = e[:-1]
    g1 = float(np.sum(np.where(active, -0.5 * x0 * x0 * (1.0 - e0), 0.0) * bracket))
    g2 = float(
        np.sum(
            np.where(active, -0.5 * x0 * x0 * (H - theta1) * (t[:-1] - T) * e0, 0.0)
            * bracket
        )
    )
    g3 = float(np.sum((T - t[:-1]) * bracket))
    resid = u - phi1 * x0
    z1 = float(np.sum(resid * x0 * bracket))
    z2 = float(
        np.sum((0.5 * phi2 - 0.5 * resid * resid) * bracket)
        + taken * gamma_n * (-0.5 * phi2) * dt
    )
    return g1, g2, g3, z1, z2


def simulate_linear_batch(A, B, C, D, x0, dt, n_steps, Q, H, p1, p2, z_act, z_env, rewards):
    """Rewards of many independent episodes under u = p1*x + p2*z_act.

    ``z_env`` (and ``z_act`` when p2 != 0) are (episodes, n_steps) noise
    matrices; ``rewards`` is filled in place. Vectorized across episodes.
    """
    m = z_env.shape[0]
    sd = math.sqrt(dt)
    x = np.full(m, float(x0))
    run = np.zeros(m)
    active = np.ones(m, dtype=bool)
    use_act = p2 != 0.0
    for k in range(n_steps):
        run += np.where(active, -0.5 * Q * x * x * dt, 0.0)
        u = p1 * x
        if use_act:
            u = u + p2 * z_act[:, k]
        xn = x + (A * x + B * u) * dt + (C * x + D * u) * sd * z_env[:, k]
        clamped = np.clip(xn, -X_MAX, X_MAX)
        x = np.where(active, clamped, x)
        active &= np.abs(xn) < X_MAX
    rewards[:] = run - 0.5 * H * x * x
    return rewards
