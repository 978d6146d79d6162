"""Command-line interface: experiment runs, result statistics, oracle checks.

Subcommands::

    almrl run --config cfg.json --out outdir [--seed N] [--workers N]
    almrl stats --in outdir --out statsdir
    almrl oracle --A .. --B .. --C .. --D .. [--Q --H --T --x0]

``run`` writes rewards.csv (method, scenario, episode, reward), params.json
(final learner parameters per run) and manifest.json (fully resolved config).
``stats`` derives curves.csv, terminal.csv and pvalues.csv from rewards.csv.
All numeric CSV fields are serialized with 17 significant digits so re-parsing
reproduces the in-memory doubles exactly; outputs are byte-stable for a fixed
config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from almrl import __version__, backend, baselines, harness, learner, stats
from almrl.market import (
    MarketModel,
    classical_gain,
    classical_lambda,
    classical_value,
    ObjectiveSpec,
)

WORKERS_ENV_VAR = "ALMRL_WORKERS"

_TOP_KEYS = {
    "seed", "scenarios", "episodes", "dt", "T", "Q", "H", "x0",
    "methods", "workers", "almrl", "acs", "mbp",
}
_ALMRL_KEYS = {
    "c_gamma", "b_exponent", "lr_exponent", "lr_scale",
    "u_theta", "u1", "u2", "epsilon", "phi2_init", "k_floor",
}
_ACS_KEYS = {"delta"}
_MBP_KEYS = {
    "sigma_e", "d_floor", "refit_every", "fit_x_max", "gain_cap",
    "min_fit_count",
}


class ConfigError(ValueError):
    pass


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {where}")


def load_config(path: Path, seed_override=None, workers_override=None
                ) -> harness.ExperimentConfig:
    """Parse the JSON config file; unknown keys are rejected by name and
    missing keys take the documented defaults."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "top level")
    alm = raw.get("almrl", {})
    _check_keys(alm, _ALMRL_KEYS, "'almrl'")
    acs = raw.get("acs", {})
    _check_keys(acs, _ACS_KEYS, "'acs'")
    mbp = raw.get("mbp", {})
    _check_keys(mbp, _MBP_KEYS, "'mbp'")

    schedules = learner.Schedules(
        c_gamma=alm.get("c_gamma", 1.0),
        b_exponent=alm.get("b_exponent", 0.25),
        lr_exponent=alm.get("lr_exponent", -0.75),
        lr_scale=alm.get("lr_scale", 1.0),
    )
    bounds = learner.ProjectionBounds(
        u_theta=alm.get("u_theta", 100.0),
        u1=alm.get("u1", 100.0),
        u2=alm.get("u2", 100.0),
        epsilon=alm.get("epsilon", 0.01),
    )
    workers = raw.get("workers", 1)
    if workers_override is not None:
        workers = workers_override
    seed = raw.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    return harness.ExperimentConfig(
        episodes=raw.get("episodes", 20000),
        scenarios=raw.get("scenarios", 200),
        dt=raw.get("dt", 0.01),
        T=raw.get("T", 1.0),
        Q=raw.get("Q", 1.0),
        H=raw.get("H", 1.0),
        x0=raw.get("x0", 1.0),
        methods=tuple(raw.get("methods", list(harness.METHODS))),
        base_seed=seed,
        worker_count=workers,
        almrl_schedules=schedules,
        almrl_bounds=bounds,
        almrl_phi2_init=alm.get("phi2_init", 1.0),
        almrl_k_floor=alm.get("k_floor", learner.DEFAULT_K_FLOOR),
        acs=baselines.AcsConfig(delta=acs.get("delta", 0.1)),
        mbp=baselines.MbpConfig(
            sigma_e=mbp.get("sigma_e", 0.1),
            d_floor=mbp.get("d_floor", 0.01),
            refit_every=mbp.get("refit_every", 1),
            fit_x_max=mbp.get("fit_x_max", 10.0),
            gain_cap=mbp.get("gain_cap", 25.0),
            min_fit_count=mbp.get("min_fit_count", 1000),
        ),
    )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _manifest_dict(config: harness.ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    d["methods"] = list(d["methods"])
    return {
        "artifact": "almrl",
        "version": __version__,
        "backend": backend.BACKEND_NAME,
        "config": d,
    }


def cmd_run(args) -> int:
    try:
        config = load_config(Path(args.config), args.seed, args.workers)
    except (OSError, json.JSONDecodeError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = harness.run_experiment(config)

    with open(out / "rewards.csv", "w") as fh:
        fh.write("method,scenario,episode,reward\n")
        for res in results:
            for episode, reward in enumerate(res.rewards):
                fh.write(
                    f"{res.method},{res.scenario_index},{episode},{_fmt(reward)}\n"
                )
    params = [
        {
            "method": res.method,
            "scenario": res.scenario_index,
            "params": res.final_params,
            "diverged_episodes": res.diverged_episodes,
            "flags": res.flags,
        }
        for res in results
    ]
    with open(out / "params.json", "w") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "manifest.json", "w") as fh:
        json.dump(_manifest_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = [r for r in results if any(f.startswith("failed") for f in r.flags)]
    for r in failed:
        print(f"warning: run {r.method}/scenario {r.scenario_index} failed: "
              f"{r.flags}", file=sys.stderr)
    return 0


def _read_rewards(path: Path) -> dict[str, dict[int, list[float]]]:
    data: dict[str, dict[int, list[float]]] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "method,scenario,episode,reward":
            raise ValueError(f"unexpected header in {path}: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns")
            method, scenario, episode, reward = parts
            series = data.setdefault(method, {}).setdefault(int(scenario), [])
            if int(episode) != len(series):
                raise ValueError(f"{path}:{lineno}: episodes out of order")
            series.append(float(reward))
    return data


def cmd_stats(args) -> int:
    in_dir = Path(args.in_dir)
    out = Path(args.out)
    try:
        data = _read_rewards(in_dir / "rewards.csv")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not data:
        print("error: rewards.csv contains no data rows", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)

    methods = sorted(data)
    with open(out / "curves.csv", "w") as fh:
        fh.write("method,episode,mean,smoothed,q25,q75\n")
        for method in methods:
            scenarios = sorted(data[method])
            matrix = np.array([data[method][s] for s in scenarios])
            curve = stats.summarize_curves(method, matrix)
            for k in range(matrix.shape[1]):
                fh.write(
                    f"{method},{k},{_fmt(curve.mean[k])},{_fmt(curve.smoothed[k])},"
                    f"{_fmt(curve.q25[k])},{_fmt(curve.q75[k])}\n"
                )

    terminal: dict[str, np.ndarray] = {}
    with open(out / "terminal.csv", "w") as fh:
        fh.write("method,scenario,terminal_reward\n")
        for method in methods:
            values = []
            for scenario in sorted(data[method]):
                value, _ = stats.terminal_reward(data[method][scenario])
                values.append(value)
                fh.write(f"{method},{scenario},{_fmt(value)}\n")
            terminal[method] = np.array(values)

    matrix = stats.pvalue_matrix(terminal)
    with open(out / "pvalues.csv", "w") as fh:
        fh.write("row_method,col_method,p\n")
        for i, mi in enumerate(matrix.methods):
            for j, mj in enumerate(matrix.methods):
                fh.write(f"{mi},{mj},{_fmt(matrix.p[i, j])}\n")
    return 0


def cmd_oracle(args) -> int:
    try:
        model = MarketModel(A=args.A, B=args.B, C=args.C, D=args.D)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    objective = ObjectiveSpec(Q=args.Q, H=args.H, T=args.T, dt=args.T, x0=args.x0)
    lam = classical_lambda(model)
    value = classical_value(model, objective, 0.0, args.x0)
    print(f"Lambda    = {_fmt(lam)}")
    print(f"phi1_star = {_fmt(classical_gain(model))}")
    print(f"V(0, x0)  = {_fmt(value)}")
    if abs(lam) < 1e-12:
        print("note: |Lambda| < 1e-12; the analytic Lambda->0 limit was used")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="almrl",
        description="LQ asset-liability management: RL training, baselines, "
        "randomized-scenario evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's base seed")
    default_workers = os.environ.get(WORKERS_ENV_VAR)
    p_run.add_argument(
        "--workers", type=int,
        default=int(default_workers) if default_workers else None,
        help=f"worker processes (default: config value or ${WORKERS_ENV_VAR})",
    )
    p_run.set_defaults(func=cmd_run)

    p_stats = sub.add_parser("stats", help="derive curves and tests from a run")
    p_stats.add_argument("--in", dest="in_dir", required=True)
    p_stats.add_argument("--out", required=True)
    p_stats.set_defaults(func=cmd_stats)

    p_oracle = sub.add_parser("oracle", help="print the classical solution")
    for flag in ("A", "B", "C", "D"):
        p_oracle.add_argument(f"--{flag}", type=float, required=True)
    p_oracle.add_argument("--Q", type=float, default=1.0)
    p_oracle.add_argument("--H", type=float, default=1.0)
    p_oracle.add_argument("--T", type=float, default=1.0)
    p_oracle.add_argument("--x0", type=float, default=1.0)
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
