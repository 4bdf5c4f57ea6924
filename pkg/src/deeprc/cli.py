"""Command-line interface: experiment runs and verification suites."""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import lemma
from .experiment import (ExperimentConfig, case_study_config_path, emit_plots,
                         export_csv, run_experiment)
from .lifting import augment, lift_signal, lift_system
from .plant import LptvPlant


def _add_common(parser):
    parser.add_argument("--config", default=None,
                        help="configuration file (defaults to the bundled case study)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")


def _load_config(args, **overrides) -> ExperimentConfig:
    if args.seed is not None:
        overrides["seed"] = args.seed
    path = args.config if args.config is not None else case_study_config_path()
    return ExperimentConfig.from_file(path, **overrides)


def _cmd_run(args) -> int:
    overrides = {}
    if args.no_noise:
        overrides["noise_enabled"] = False
    if args.policy is not None:
        overrides["policy"] = args.policy
    cfg = _load_config(args, **overrides)
    t0 = time.perf_counter()
    report = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    paths = export_csv(report, args.out)
    paths += emit_plots(report, args.out)
    post = report.enable_index // report.period
    print(f"run complete in {elapsed:.1f} s "
          f"(seed {cfg.seed}, noise {'on' if cfg.noise_enabled else 'off'})")
    for name in ("deeprc", "baseline", "nocontrol"):
        costs = report.arm(name).iteration_costs[post:]
        print(f"  {name:9s} median post-enable cost {np.median(costs):12.4f}")
    print("wrote:")
    for p in paths:
        print(f"  {p}")
    return 0


def _cmd_verify_lemma(args) -> int:
    suites = [
        ("full rank with controllable generator", lemma.full_rank_suite(seed=args.seed or 0)),
        ("prescribed rank deficiency + representability",
         lemma.rank_deficiency_suite(seed=args.seed or 0)),
        ("disturbance-free regression", lemma.classic_suite(seed=args.seed or 0)),
    ]
    all_ok = True
    for title, cases in suites:
        ok = all(c.passed for c in cases)
        all_ok &= ok
        print(f"[{'PASS' if ok else 'FAIL'}] {title} ({len(cases)} checks)")
        for case in cases:
            mark = "ok " if case.passed else "FAIL"
            detail = f"  {case.detail}" if case.detail else ""
            print(f"   {mark} {case.label}: measured {case.measured:g}, "
                  f"expected {case.expected:g}{detail}")

    cfg = _load_config(args)
    lifted = lift_system(cfg.plant, 0)
    system = lemma.augmented_from_lifted(lifted)
    P = cfg.plant.period
    d0 = lift_signal(np.sin(2.0 * np.pi * np.arange(P) / P), P)[0]
    report = lemma.controllability_rank(system.a_d, d0, name="(disturbance generator, d0)")
    ok = report.rank == 1
    all_ok &= ok
    print(f"[{'PASS' if ok else 'FAIL'}] constant-disturbance generator: "
          f"orbit rank {report.rank} (dimension {report.dim})")
    print("overall:", "PASS" if all_ok else "FAIL")
    return 0 if all_ok else 1


def _cmd_lift_check(args) -> int:
    cfg = _load_config(args)
    plant = cfg.plant
    P = plant.period
    lifted = lift_system(plant, 0)
    periods = args.periods
    rng = np.random.default_rng(np.random.SeedSequence(args.seed or 0))
    worst = 0.0
    for trial in range(args.trials):
        T = periods * P
        u = rng.standard_normal((T, plant.r))
        d = rng.standard_normal((T, plant.m))
        e = rng.standard_normal((T, plant.l))
        x0 = rng.standard_normal(plant.n)
        log = plant.simulate(x0, 0, u, d, e)
        y_ref = lift_signal(log.y, P)
        x = x0.copy()
        err = 0.0
        u_l, d_l, e_l = (lift_signal(s, P) for s in (u, d, e))
        for j in range(periods):
            x, y = lifted.step(x, u_l[j], d_l[j], e_l[j])
            err = max(err, float(np.max(np.abs(y - y_ref[j]))))
        worst = max(worst, err)
    ok = worst <= args.tol
    print(f"lifted-iteration equivalence over {args.trials} trials x {periods} periods: "
          f"max abs deviation {worst:.3e} (tolerance {args.tol:g})")
    print("overall:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="deeprc",
        description="Per-period data-driven control of periodic plants: "
                    "simulation runs and numerical verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate the three-arm experiment")
    _add_common(p_run)
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--no-noise", action="store_true", help="zero the innovation noise")
    p_run.add_argument("--policy", choices=["first-sample", "full-period"], default=None)

    p_verify = sub.add_parser("verify-lemma", help="run the rank/representability suites")
    _add_common(p_verify)

    p_lift = sub.add_parser("lift-check", help="check per-sample vs lifted simulation")
    _add_common(p_lift)
    p_lift.add_argument("--periods", type=int, default=50)
    p_lift.add_argument("--trials", type=int, default=10)
    p_lift.add_argument("--tol", type=float, default=1e-10)

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify-lemma":
        return _cmd_verify_lemma(args)
    if args.command == "lift-check":
        return _cmd_lift_check(args)
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
