# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: episode simulation, episode reward, update sums.

Semantics match almrl._kernels_py; see that module for documentation.
"""

from libc.math cimport exp, sqrt

BACKEND_NAME = "compiled"

X_MAX = 1e12

MODE_LINEAR = 0
MODE_DEADBAND = 1

cdef double _X_MAX = 1e12


def simulate_episode_arrays(double A, double B, double C, double D, double x0,
                            double dt, int n_steps, int mode, double p1,
                            double p2, double p3, double[::1] z_act,
                            double[::1] z_env, double[::1] states,
                            double[::1] actions):
    cdef int k
    cdef double x = x0
    cdef double u
    cdef double sd = sqrt(dt)
    cdef bint use_act = (mode == 0 and p2 != 0.0)
    states[0] = x
    for k in range(n_steps):
        if mode == 0:
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
        if not (-_X_MAX < x < _X_MAX):
            x = _X_MAX if x > 0 else -_X_MAX
            states[k + 1] = x
            return k + 1, True
        states[k + 1] = x
    return n_steps, False


def reward_from_states(double[::1] states, int taken, double Q, double H,
                       double dt):
    cdef int k
    cdef double run = 0.0
    for k in range(taken):
        run += states[k] * states[k]
    return -0.5 * Q * run * dt - 0.5 * H * states[taken] * states[taken]


def update_sums(double[::1] states, double[::1] actions, int taken, double dt,
                double T, double Q, double H, double theta1, double theta2,
                double theta3, double phi1, double phi2, double gamma_n,
                double entropy, double k_floor):
    cdef double g1 = 0.0, g2 = 0.0, g3 = 0.0, z1 = 0.0, z2 = 0.0
    cdef double ent_dt = gamma_n * entropy * dt
    cdef double t, tn, x, xn, u, e, en, k1, k1n, J, Jn, br, resid
    cdef int k
    for k in range(taken):
        t = k * dt
        tn = (k + 1) * dt
        x = states[k]
        xn = states[k + 1]
        u = actions[k]
        e = exp(theta2 * (t - T))
        en = exp(theta2 * (tn - T))
        k1 = theta1 + (H - theta1) * e
        k1n = theta1 + (H - theta1) * en
        J = -0.5 * (k1 if k1 >= k_floor else k_floor) * x * x + theta3 * (T - t)
        Jn = -0.5 * (k1n if k1n >= k_floor else k_floor) * xn * xn \
            + theta3 * (T - tn)
        br = Jn - J - 0.5 * Q * x * x * dt + ent_dt
        if k1 >= k_floor:
            g1 += (-0.5 * x * x * (1.0 - e)) * br
            g2 += (-0.5 * x * x * (H - theta1) * (t - T) * e) * br
        g3 += (T - t) * br
        resid = u - phi1 * x
        z1 += resid * x * br
        z2 += (0.5 * phi2 - 0.5 * resid * resid) * br \
            + gamma_n * (-0.5 * phi2) * dt
    return g1, g2, g3, z1, z2


def simulate_linear_batch(double A, double B, double C, double D, double x0,
                          double dt, int n_steps, double Q, double H,
                          double p1, double p2, z_act,
                          double[:, ::1] z_env, double[::1] rewards):
    cdef int m = z_env.shape[0]
    cdef int i, k
    cdef double sd = sqrt(dt)
    cdef double x, u, run
    cdef bint use_act = p2 != 0.0
    cdef double[:, ::1] za
    if use_act:
        za = z_act
    for i in range(m):
        x = x0
        run = 0.0
        for k in range(n_steps):
            run += -0.5 * Q * x * x * dt
            u = p1 * x
            if use_act:
                u += p2 * za[i, k]
            x = x + (A * x + B * u) * dt + (C * x + D * u) * sd * z_env[i, k]
            if not (-_X_MAX < x < _X_MAX):
                x = _X_MAX if x > 0 else -_X_MAX
                break
        rewards[i] = run - 0.5 * H * x * x
    return rewards
