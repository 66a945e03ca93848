"""Command-line interface.

Subcommands: synth, condition, session, solve, study, e2e, sweep. Each
accepts a structured-text config file plus flag overrides and writes CSV
data, a key = value summary, and (for report scenarios) PNG figures. Exit
status 0 on success, 3 for a reported non-convergence, nonzero with a
diagnostic line on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from sepsync import __version__
from sepsync.comb import PllConfig, run_pll
from sepsync.configfile import (ConfigError, experiment_from_config,
                                parse_config, solver_from_config,
                                study_params_from_config)
from sepsync.experiments import (ExperimentConfig, run_e2e, run_ntp_baseline,
                                 run_pipeline_bench, run_strength_sweep)
from sepsync.links import (INTERNET_I_BOUNDS, INTERNET_J_BOUNDS,
                           preset_by_name)
from sepsync.protocol import Node, NodeClock, ntp_offset, run_session
from sepsync.signals import SepSynthesisConfig, condition_trace, synthesize_sep
from sepsync.solver import SolverConfig, convergence_study, solve
from sepsync import storage


def _load(args):
    return parse_config(args.config) if args.config else None


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _experiment(args, scenario: str | None = None) -> ExperimentConfig:
    parser = _load(args)
    if parser is not None:
        return experiment_from_config(parser, scenario=scenario,
                                      seed=args.seed, trials=args.trials,
                                      out_dir=args.out)
    preset = getattr(args, "preset", "ble")
    # The internet preset needs the prior ambiguity bounds implied by its
    # delay support; one-way delays there always exceed the comb period, so
    # an unbounded search could never collapse.
    solver = (SolverConfig(i_bounds=INTERNET_I_BOUNDS,
                           j_bounds=INTERNET_J_BOUNDS)
              if preset == "internet" else SolverConfig())
    return ExperimentConfig(
        scenario=scenario or "e2e_sync",
        link=preset_by_name(preset, seed=args.seed or 0),
        trials=args.trials if args.trials is not None else 100,
        seed=args.seed if args.seed is not None else 0,
        solver=solver,
        out_dir=args.out)


def cmd_synth(args) -> int:
    parser = _load(args)
    if parser is not None:
        from sepsync.configfile import sep_from_config

        sep = sep_from_config(parser["sep"] if "sep" in parser else None)
    else:
        sep = SepSynthesisConfig()
    if args.strength is not None:
        sep = replace(sep, signal_strength=args.strength)
    if args.mains is not None:
        sep = replace(sep, mains_frequency_hz=args.mains)
    if args.seed is not None:
        sep = replace(sep, rng_seed=args.seed)
    trace = synthesize_sep(sep, args.duration)
    out = Path(args.out or "trace.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    storage.write_trace_csv(out, trace)
    print(f"wrote {len(trace)} samples to {out}")
    return 0


def cmd_condition(args) -> int:
    trace = storage.read_trace_csv(args.trace)
    zcs = condition_trace(trace, args.filter, args.mains)
    out = _outdir(args)
    storage.write_zcs_csv(out / "zcs.csv", zcs)
    comb = run_pll(zcs, PllConfig(nominal_period_ms=1000.0 / args.mains))
    storage.write_comb_csv(out / "comb.csv", comb)
    print(f"crossings = {len(zcs)}")
    print(f"period_ms = {comb.period_ms:.6f}")
    return 0


def cmd_session(args) -> int:
    config = _experiment(args, scenario="ntp_baseline")
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))
    delta_gt = float(rng.uniform(*config.offset_range_ms))
    slave = Node(NodeClock(delta_gt), comb_shift_ms=config.epsilon.constant_ms,
                 period_ms=config.solver.period_ms, clock_id="slave")
    master = Node(NodeClock(0.0), period_ms=config.solver.period_ms,
                  clock_id="master")
    rec = run_session(slave, master, config.link,
                      t1_ref_ms=float(rng.uniform(0, 60_000)), rng=rng,
                      compute_ms=config.compute_ms)
    out = _outdir(args)
    storage.write_sessions_csv(out / "sessions.csv", [rec])
    for name in ("t1", "t2", "t3", "t4", "phi1", "phi2", "phi3", "phi4"):
        print(f"{name} = {getattr(rec, name):.3f}")
    print(f"theta_q = {rec.theta_q:.3f}")
    print(f"theta_p = {rec.theta_p:.3f}")
    print(f"rtt = {rec.rtt:.3f}")
    print(f"ntp_offset = {ntp_offset(rec):.3f}")
    print(f"delta_gt = {rec.truth.delta_gt_ms:.3f}")
    return 0


def cmd_solve(args) -> int:
    records = storage.read_sessions_csv(args.sessions)
    parser = _load(args)
    solver = solver_from_config(parser) if parser is not None else SolverConfig()
    bounds = {}
    if args.imin is not None or args.imax is not None:
        if args.imax is None:
            raise ConfigError("--imin requires --imax")
        bounds["i_bounds"] = (args.imin or 0, args.imax)
    if args.jmin is not None or args.jmax is not None:
        if args.jmax is None:
            raise ConfigError("--jmin requires --jmax")
        bounds["j_bounds"] = (args.jmin or 0, args.jmax)
    if args.period is not None:
        bounds["period_ms"] = args.period
    if bounds:
        solver = replace(solver, **bounds)
    result = solve(iter(records), solver, record_history=True)
    for k, cands in enumerate(result.candidate_history, start=1):
        print(f"session {k}: candidates = "
              f"[{', '.join(f'{c:.3f}' for c in cands)}]")
    if result.converged:
        print(f"delta_ms = {result.delta_ms:.3f}")
        print(f"K = {result.sessions_used}")
        return 0
    print(f"non-convergence: {result.reason}")
    return 3


def cmd_study(args) -> int:
    parser = _load(args)
    params = study_params_from_config(parser) if parser is not None else {
        "i_max": 10, "j_max": 10, "period_ms": 20.0, "max_sessions": 200}
    if args.imax is not None:
        params["i_max"] = args.imax
    if args.jmax is not None:
        params["j_max"] = args.jmax
    trials = args.trials if args.trials is not None else 100_000
    seed = args.seed if args.seed is not None else 0
    out = _outdir(args)

    if args.grid:
        return _study_grid(args, params, trials, seed, out)

    result = convergence_study(params["i_max"], params["j_max"], trials, seed,
                               period_ms=params["period_ms"],
                               max_sessions=params["max_sessions"])
    storage.write_study_csv(out / "study.csv", result.k_values,
                            result.converged, result.delta_errors)
    summary = {"scenario": "convergence_study", "seed": seed,
               "i_max": params["i_max"], "j_max": params["j_max"]}
    summary.update(result.summary())
    storage.write_summary(out / "summary.txt", summary)
    if not args.no_figures:
        from sepsync import figures

        figures.render_k_histogram(
            out / "k_hist.png", result.k_values[result.converged],
            f"i_max={params['i_max']}, j_max={params['j_max']}, "
            f"{trials} trials")
    for key, value in summary.items():
        print(f"{key} = {value}")
    return 0


def _study_grid(args, params, trials, seed, out) -> int:
    """Mean sessions-to-convergence over every range pair up to the caps."""
    import csv

    i_top, j_top = params["i_max"], params["j_max"]
    grid = np.zeros((i_top + 1, j_top + 1))
    for i_max in range(i_top + 1):
        for j_max in range(j_top + 1):
            result = convergence_study(i_max, j_max, trials, seed,
                                       period_ms=params["period_ms"],
                                       max_sessions=params["max_sessions"])
            grid[i_max, j_max] = result.summary()["mean_k"]
    with open(out / "mean_k_grid.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i_max", "j_max", "mean_k"])
        for i_max in range(i_top + 1):
            for j_max in range(j_top + 1):
                writer.writerow([i_max, j_max, f"{grid[i_max, j_max]:.4f}"])
    summary = {"scenario": "convergence_study_grid", "seed": seed,
               "trials_per_point": trials, "i_max": i_top, "j_max": j_top,
               "corner_mean_k": float(grid[i_top, j_top])}
    storage.write_summary(out / "summary.txt", summary)
    if not args.no_figures:
        from sepsync import figures

        figures.render_mean_k_grid(out / "mean_k_grid.png", grid)
    for key, value in summary.items():
        print(f"{key} = {value}")
    return 0


def cmd_e2e(args) -> int:
    config = _experiment(args, scenario=args.scenario)
    out = _outdir(args)
    if config.scenario == "pipeline_bench":
        summary = run_pipeline_bench(config)
        storage.write_summary(out / "summary.txt", summary)
        for key, value in summary.items():
            print(f"{key} = {value}")
        return 0
    report = (run_e2e(config) if config.scenario == "e2e_sync"
              else run_ntp_baseline(config))
    storage.write_trials_csv(out / "trials.csv", report.trial_rows)
    storage.write_session_errors_csv(out / "session_errors.csv",
                                     report.session_rows)
    storage.write_summary(out / "summary.txt", report.summary)
    if not args.no_figures:
        from sepsync import figures

        conv = [r for r in report.trial_rows if r.converged]
        if conv:
            figures.render_error_histogram(
                out / "error_hist.png",
                [r.delta_error_ms for r in conv],
                f"{config.scenario}: converged offset errors")
            figures.render_k_histogram(
                out / "k_hist.png", [r.k for r in conv],
                f"{config.scenario}: sessions until convergence")
            figures.render_error_comparison(
                out / "error_comparison.png",
                [r.delta_error_ms for r in conv],
                [r.ntp_error_ms for r in report.session_rows])
    for key, value in report.summary.items():
        print(f"{key} = {value}")
    return 0


def cmd_sweep(args) -> int:
    config = _experiment(args, scenario="strength_sweep")
    if args.strength is not None:
        config = replace(config, sweep_strength=args.strength)
    report = run_strength_sweep(config)
    out = _outdir(args)
    storage.write_sweep_csv(out / "sweep.csv", report.rows)
    storage.write_summary(out / "summary.txt", report.summary)
    if not args.no_figures:
        from sepsync import figures

        figures.render_sweep(out / "mae_vs_strength.png",
                             [r.strength for r in report.rows],
                             [r.mae_ms for r in report.rows])
    for key, value in report.summary.items():
        print(f"{key} = {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepsync",
        description="Mains-hum assisted clock synchronization simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output directory"):
        p.add_argument("--config", help="structured-text config file")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--trials", type=int, help="number of trials")
        p.add_argument("--out", help=out_help)
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG figure rendering")

    p = sub.add_parser("synth", help="synthesize a SEP trace to CSV")
    common(p, out_help="output trace file (default trace.csv)")
    p.add_argument("--strength", type=float, help="signal strength in [0, 1]")
    p.add_argument("--mains", type=float, help="mains frequency (50 or 60)")
    p.add_argument("--duration", type=float, default=5.0,
                   help="trace duration in seconds")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("condition",
                       help="filter a trace and emit crossings and a comb")
    common(p)
    p.add_argument("--trace", required=True, help="input trace CSV")
    p.add_argument("--filter", choices=("bpf", "mrf"), default="bpf")
    p.add_argument("--mains", type=float, default=50.0)
    p.set_defaults(func=cmd_condition)

    p = sub.add_parser("session", help="simulate one synchronization session")
    common(p)
    p.add_argument("--preset", default="ble", help="link preset name")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("solve", help="run the ambiguity solver on a session log")
    common(p)
    p.add_argument("--sessions", required=True, help="session log CSV")
    p.add_argument("--imin", type=int)
    p.add_argument("--imax", type=int)
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--period", type=float, help="comb period T in ms")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("study", help="convergence-speed study of the solver")
    common(p)
    p.add_argument("--imax", type=int, help="ambiguity range cap for i")
    p.add_argument("--jmax", type=int, help="ambiguity range cap for j")
    p.add_argument("--grid", action="store_true",
                   help="sweep every range pair up to the caps and report "
                        "the mean-K grid")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("e2e", help="end-to-end synchronization experiment")
    common(p)
    p.add_argument("--preset", default="ble", help="link preset name")
    p.add_argument("--scenario", default=None,
                   choices=("e2e_sync", "ntp_baseline", "pipeline_bench"))
    p.set_defaults(func=cmd_e2e)

    p = sub.add_parser("sweep", help="signal-strength robustness sweep")
    common(p)
    p.add_argument("--strength", type=float, help="baseline signal strength")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
