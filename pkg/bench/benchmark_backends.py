"""Compare the compiled kernel extension against the pure-Python fallback.

Times the three hot paths (episode simulation, update sums, batch evaluation)
and a short end-to-end training run, and checks that both backends produce
matching numbers on identical inputs.

Usage: python bench/benchmark_backends.py [--episodes N]
"""

import argparse
import math
import time

import numpy as np

from almrl import _kernels_py as py_kernels
from almrl.rng import SeedSpec, derive_stream, standard_normals

try:
    from almrl import _kernels as c_kernels
except ImportError:
    c_kernels = None


def _timeit(fn, repeats=5):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_simulate(kern, n_episodes, k=100):
    stream = derive_stream(SeedSpec(1))
    z_env = standard_normals(stream, (n_episodes, k))
    z_act = standard_normals(stream, (n_episodes, k))
    states = np.empty(k + 1)
    actions = np.empty(k)

    def run():
        for i in range(n_episodes):
            kern.simulate_episode_arrays(
                0.02, 0.1, 0.15, 0.15, 1.0, 0.01, k,
                kern.MODE_LINEAR, -3.0, 0.7, 0.0,
                z_act[i], z_env[i], states, actions,
            )

    return _timeit(run), states.copy()


def bench_update_sums(kern, n_calls, k=100):
    stream = derive_stream(SeedSpec(2))
    states = standard_normals(stream, k + 1)
    actions = standard_normals(stream, k)
    out = None

    def run():
        nonlocal out
        for _ in range(n_calls):
            out = kern.update_sums(
                states, actions, k, 0.01, 1.0, 1.0, 1.0,
                0.9, 0.8, -0.2, -1.5, 0.6, 0.4, 1.42, 1e-4,
            )

    return _timeit(run), out


def bench_batch(kern, n_episodes, k=100):
    stream = derive_stream(SeedSpec(3))
    z_env = standard_normals(stream, (n_episodes, k))
    z_act = standard_normals(stream, (n_episodes, k))
    rewards = np.empty(n_episodes)

    def run():
        kern.simulate_linear_batch(
            0.02, 0.1, 0.15, 0.15, 1.0, 0.01, k, 1.0, 1.0, -3.0, 0.5,
            z_act, z_env, rewards,
        )

    return _timeit(run), rewards.copy()


def bench_training(episodes):
    import os
    import subprocess
    import sys

    script = (
        "import time\n"
        "from almrl import learner, backend\n"
        "from almrl.learner import AlmrlConfig, Streams\n"
        "from almrl.market import MarketModel, ObjectiveSpec\n"
        "from almrl.rng import SeedSpec, derive_stream\n"
        "model = MarketModel(0.02, 0.1, 0.15, 0.15)\n"
        "obj = ObjectiveSpec(Q=1, H=1, T=1, dt=0.01, x0=1)\n"
        f"config = AlmrlConfig(episodes={episodes})\n"
        "streams = Streams(derive_stream(SeedSpec(9, 1)), derive_stream(SeedSpec(9, 2)))\n"
        "t0 = time.perf_counter()\n"
        "r = learner.train(model, obj, config, streams)\n"
        "dt = time.perf_counter() - t0\n"
        "print(f'{backend.BACKEND_NAME} {dt:.3f} {r.final_params[\"phi1\"]:.12f}')\n"
    )
    out = {}
    for name in ("compiled", "python"):
        env = dict(os.environ, ALMRL_BACKEND=name)
        proc = subprocess.run(
            [sys.executable, "-c", script], env=env, capture_output=True, text=True
        )
        if proc.returncode != 0:
            out[name] = None
            continue
        backend_name, seconds, phi1 = proc.stdout.split()
        assert backend_name == name
        out[name] = (float(seconds), float(phi1))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=2000,
                        help="episodes for the per-kernel loops")
    args = parser.parse_args()

    if c_kernels is None:
        print("compiled extension not available; nothing to compare")
        return

    rows = []
    for label, fn, n in (
        ("simulate_episode x%d" % args.episodes, bench_simulate, args.episodes),
        ("update_sums x%d" % args.episodes, bench_update_sums, args.episodes),
        ("batch %d episodes" % (args.episodes * 10), bench_batch, args.episodes * 10),
    ):
        t_py, out_py = fn(py_kernels, n)
        t_c, out_c = fn(c_kernels, n)
        agree = np.allclose(np.asarray(out_py), np.asarray(out_c), rtol=1e-10)
        rows.append((label, t_py, t_c, t_py / t_c, agree))

    print(f"{'kernel':<28}{'python':>10}{'compiled':>10}{'speedup':>9}  agree")
    for label, t_py, t_c, speedup, agree in rows:
        print(f"{label:<28}{t_py:>9.4f}s{t_c:>9.4f}s{speedup:>8.1f}x  {agree}")

    training = bench_training(args.episodes * 10)
    print()
    print(f"end-to-end training, {args.episodes * 10} episodes:")
    for name in ("python", "compiled"):
        if training.get(name) is None:
            print(f"  {name:<9} unavailable")
        else:
            seconds, phi1 = training[name]
            print(f"  {name:<9} {seconds:.3f}s  final phi1 {phi1:.12f}")
    both = training.get("python"), training.get("compiled")
    if all(both):
        drift = abs(both[0][1] - both[1][1])
        print(f"  |phi1 difference| = {drift:.3e} "
              "(float summation order only)")


if __name__ == "__main__":
    main()
