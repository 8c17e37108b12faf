"""Command-line entry point: experiment orchestration and artifacts.

Subcommands::

    bvsim kernel     -c cfg.ini    tabulate K, sigma^2, sigma1^2, sigma2^2 (CSV)
    bvsim simulate   -c cfg.ini    replicate ensemble, count summaries, dumps
    bvsim moments    -c cfg.ini    analytic moment oracles (JSON)
    bvsim conditions -c cfg.ini    limit-theorem condition traces (JSON + CSV)
    bvsim lln        -c cfg.ini    scaled/ratio statistics vs oracle targets

Exit codes: 0 pass, 1 tolerance violation, 2 invalid input, 3 capped run.
Outputs are deterministic for a fixed configuration and seed: no timestamps
are embedded, replicate results are reduced in index order, and the worker
count (``--threads`` or ``BVSIM_THREADS``) never changes the numbers.
CSV uses 17 significant digits so artifacts are bit-exact comparable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .branching import expected_count, second_moment_count
from .config import ConfigError, ExperimentConfig, test_function_to_text
from .kernels import UnsupportedRegimeError, eval_kernel, sigma_split, sigma_sq, variance_profile
from .lln import check_conditions, limit_target, lln_statistics
from .moments import (
    conditional_variance,
    fou_second_moment,
    mean_functional,
    second_moment_functional,
    variance_bound,
)
from .particles import CappedRunError, SimConfig, simulate
from .quadrature import QuadratureError
from .runner import EnsemblePlan, MotionTask, resolve_workers, run_ensemble

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_INVALID = 2
EXIT_CAPPED = 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _config_echo(cfg: ExperimentConfig) -> dict:
    resolved = cfg.resolved_dict()
    # execution details do not affect the numbers and stay out of artifacts
    # (worker count and output location, like timing, are not experiment data)
    resolved.get("simulation", {}).pop("threads", None)
    resolved.get("output", {}).pop("dir", None)
    return {"config": resolved, "root_seed": cfg.root_seed}


def _out_path(cfg: ExperimentConfig, suffix: str) -> Path:
    return Path(cfg.output_dir) / f"{cfg.output_prefix}_{suffix}"


def cmd_kernel(cfg: ExperimentConfig) -> int:
    rows = ["t,s,K,sigma_sq,sigma1_sq,sigma2_sq"]
    for t in cfg.table_times:
        total = sigma_sq(cfg.kernel, t, cfg.quad)
        for j in range(1, cfg.table_s_count + 1):
            s = t * j / (cfg.table_s_count + 1)
            k = eval_kernel(cfg.kernel, t, s, cfg.quad)
            s1, s2 = sigma_split(cfg.kernel, t, s, cfg.quad)
            rows.append(",".join(_fmt(v) for v in (t, s, k, total, s1, s2)))
    path = _out_path(cfg, "kernel.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n")
    _write_json(_out_path(cfg, "kernel.json"), _config_echo(cfg))
    print(f"wrote {path}")
    return EXIT_OK


def _ensemble(cfg: ExperimentConfig, times: tuple) -> tuple:
    plan = EnsemblePlan(
        law=cfg.law,
        r=cfg.memory_length_r,
        horizon=cfg.horizon_t,
        dt=cfg.grid_dt,
        dim=cfg.kernel.dim,
        root_seed=cfg.root_seed,
        tasks=(MotionTask("main", cfg.kernel, tuple(cfg.x0), tuple(times)),),
        fs=tuple(cfg.test_functions),
        max_particles=cfg.max_particles,
        quad=cfg.quad,
    )
    workers = resolve_workers(cfg.threads)
    return plan, run_ensemble(plan, cfg.replicates, workers)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    times = tuple(cfg.snapshot_times)
    beta = cfg.law.beta
    r = cfg.memory_length_r
    out: dict = _config_echo(cfg)
    if cfg.with_positions or cfg.dump_snapshots or cfg.dump_events:
        # full per-replicate runs (needed for dumps); still deterministic
        rows = []
        events = []
        counts = np.empty((cfg.replicates, len(times)))
        sim_cfg = SimConfig(
            kernel=cfg.kernel,
            law=cfg.law,
            x0=np.asarray(cfg.x0),
            grid_dt=cfg.grid_dt,
            horizon_T=cfg.horizon_t,
            snapshot_times=times,
            memory_length_r=r,
            max_particles=cfg.max_particles,
            root_seed=cfg.root_seed,
            with_positions=cfg.with_positions,
            quad=cfg.quad,
        )
        weight_table: dict = {}
        for rep in range(cfg.replicates):
            res = simulate(sim_cfg, replicate=rep, weight_table=weight_table)
            for j, snap in enumerate(res.snapshots):
                counts[rep, j] = snap.count
                if cfg.dump_snapshots and snap.positions is not None:
                    for label, pos in zip(snap.labels, snap.positions):
                        gen = label.count(".")
                        coords = ",".join(_fmt(v) for v in pos)
                        rows.append(f"{rep},{_fmt(snap.t)},{label},{gen},{coords}")
            if cfg.dump_events:
                for ev in res.events():
                    events.append(json.dumps({"replicate": rep, **ev}, sort_keys=True))
        if cfg.dump_snapshots:
            path = _out_path(cfg, "snapshots.csv")
            path.parent.mkdir(parents=True, exist_ok=True)
            dim_cols = ",".join(f"x_{i + 1}" for i in range(cfg.kernel.dim))
            path.write_text("\n".join([f"replicate,t,particle_id,generation,{dim_cols}"] + rows) + "\n")
        if cfg.dump_events:
            path = _out_path(cfg, "events.jsonl")
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("\n".join(events) + ("\n" if events else ""))
    else:
        _, result = _ensemble(cfg, times)
        counts = result.counts["main"]
    mart = np.exp(-beta * (np.asarray(times) - r))[None, :] * counts
    n = cfg.replicates
    out["times"] = list(times)
    out["mean_count"] = [float(v) for v in counts.mean(axis=0)]
    out["se_count"] = [float(v) for v in counts.std(axis=0, ddof=1) / math.sqrt(n)] if n > 1 else [0.0] * len(times)
    out["second_moment_count"] = [float(v) for v in (counts**2).mean(axis=0)]
    out["martingale_mean"] = [float(v) for v in mart.mean(axis=0)]
    out["expected_count_oracle"] = [expected_count(cfg.law, t, r) for t in times]
    out["second_moment_oracle"] = [second_moment_count(cfg.law, t, r) for t in times]
    path = _out_path(cfg, "simulate.json")
    _write_json(path, out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_moments(cfg: ExperimentConfig) -> int:
    t = cfg.moments_t if cfg.moments_t is not None else cfg.horizon_t
    s = cfg.moments_s if cfg.moments_s is not None else cfg.memory_length_r
    r = cfg.memory_length_r
    prof = variance_profile(cfg.kernel, cfg.quad)
    out: dict = _config_echo(cfg)
    out["t"] = t
    out["s"] = s
    out["expected_count"] = expected_count(cfg.law, t, r)
    out["second_moment_count"] = second_moment_count(cfg.law, t, r)
    per_f = []
    for f in cfg.test_functions:
        entry = {"test_function": test_function_to_text(f)}
        entry["mean_functional"] = mean_functional(
            cfg.kernel, cfg.law, f, t, r, x0=np.asarray(cfg.x0), q=cfg.quad, profile=prof
        )
        entry["second_moment_functional"] = second_moment_functional(
            cfg.kernel, cfg.law, f, f, t, r, x0=np.asarray(cfg.x0), q=cfg.quad, profile=prof
        )
        entry["conditional_variance"] = conditional_variance(
            cfg.kernel, cfg.law, f, t, s, r, x0=np.asarray(cfg.x0), q=cfg.quad, profile=prof
        )
        if f.integrable:
            entry["variance_bound"] = variance_bound(
                cfg.kernel, cfg.law, f, t, s, r, q=cfg.quad, profile=prof
            )
        per_f.append(entry)
    out["functionals"] = per_f
    if cfg.kernel.drift_mu < 0.0:
        value, limit = fou_second_moment(cfg.kernel, t, cfg.quad)
        out["reverting_variance"] = {"t": t, "value": value, "limit": limit}
    path = _out_path(cfg, "moments.json")
    _write_json(path, out)
    print(json.dumps({k: v for k, v in out.items() if k != "config"}, indent=2, sort_keys=True))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_conditions(cfg: ExperimentConfig) -> int:
    report = check_conditions(
        cfg.kernel,
        cfg.law,
        x0=np.asarray(cfg.x0),
        b_kind=cfg.b_schedule,
        delta=cfg.delta,
        kappa=cfg.kappa,
        r=cfg.memory_length_r,
        probes=cfg.probe_times or None,
        q=cfg.quad,
    )
    out: dict = _config_echo(cfg)
    out.update(
        {
            "b_kind": report.b_kind,
            "delta": report.delta,
            "kappa": report.kappa,
            "ell": report.ell if math.isfinite(report.ell) else "inf",
            "probes": report.probes.tolist(),
            "decay_trace": report.decay_trace.tolist(),
            "sigma_trace": report.sigma_trace.tolist(),
            "flow_trace": report.flow_trace.tolist(),
            "memory_cut_trace": report.memory_cut_trace.tolist(),
            "memory_cut_trace_nolog": report.memory_cut_trace_nolog.tolist(),
            "decay_decreasing": report.decay_decreasing,
            "memory_cut_decreasing": report.memory_cut_decreasing,
            "memory_cut_nolog_decreasing": report.memory_cut_nolog_decreasing,
            "lattice_sum_total": report.lattice_sum_total,
            "lattice_tail_fraction": report.lattice_tail_fraction,
            "lattice_cauchy": report.lattice_cauchy,
        }
    )
    _write_json(_out_path(cfg, "conditions.json"), out)
    rows = ["t,decay,sigma,flow,memory_cut,memory_cut_nolog"]
    for i, t in enumerate(report.probes):
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    t,
                    report.decay_trace[i],
                    report.sigma_trace[i],
                    report.flow_trace[i],
                    report.memory_cut_trace[i],
                    report.memory_cut_trace_nolog[i],
                )
            )
        )
    path = _out_path(cfg, "conditions.csv")
    path.write_text("\n".join(rows) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_lln(cfg: ExperimentConfig) -> int:
    cfg.law.require_supercritical()
    times = tuple(cfg.snapshot_times)
    _, result = _ensemble(cfg, times)
    target = limit_target(cfg.kernel, np.asarray(cfg.x0), cfg.quad)
    out: dict = _config_echo(cfg)
    out["times"] = list(times)
    out["n_replicates"] = cfg.replicates
    reports = []
    violated = False
    csv_rows = ["f,t,ratio_mean,ratio_se,ratio_target,scaled_mean,scaled_se,scaled_target"]
    for k, f in enumerate(cfg.test_functions):
        rep = lln_statistics(
            result.samples("main", k), cfg.kernel, cfg.law, f,
            r=cfg.memory_length_r, target=target, q=cfg.quad,
        )
        entry = {
            "test_function": test_function_to_text(f),
            "ratio_mean": rep.ratio_mean.tolist(),
            "ratio_se": rep.ratio_se.tolist(),
            "ratio_target": rep.ratio_target,
            "scaled_mean": rep.scaled_mean.tolist(),
            "scaled_se": rep.scaled_se.tolist(),
            "scaled_target": rep.scaled_target,
            "n_surviving": rep.n_surviving,
            "degenerate": rep.degenerate,
        }
        final = rep.ratio_mean[-1]
        entry["ratio_rel_error"] = (
            float(abs(final - rep.ratio_target) / abs(rep.ratio_target)) if rep.n_surviving else None
        )
        ok = bool(rep.n_surviving > 0 and entry["ratio_rel_error"] <= cfg.ratio_rel_tol)
        entry["pass"] = ok
        violated = violated or not ok
        reports.append(entry)
        for j, t in enumerate(times):
            csv_rows.append(
                ",".join(
                    [test_function_to_text(f).replace(",", ";")]
                    + [
                        _fmt(v)
                        for v in (
                            t,
                            rep.ratio_mean[j],
                            rep.ratio_se[j],
                            rep.ratio_target,
                            rep.scaled_mean[j],
                            rep.scaled_se[j],
                            rep.scaled_target,
                        )
                    ]
                )
            )
    out["reports"] = reports
    out["pass"] = not violated
    _write_json(_out_path(cfg, "lln.json"), out)
    path = _out_path(cfg, "lln.csv")
    path.write_text("\n".join(csv_rows) + "\n")
    for entry in reports:
        status = "PASS" if entry["pass"] else "FAIL"
        print(
            f"{status} {entry['test_function']}: ratio {entry['ratio_mean'][-1]:.6g} "
            f"vs target {entry['ratio_target']:.6g} "
            f"(rel err {entry['ratio_rel_error'] if entry['ratio_rel_error'] is not None else float('nan'):.4f}, "
            f"tol {cfg.ratio_rel_tol})"
        )
    print(f"wrote {path}")
    return EXIT_TOLERANCE if violated else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvsim",
        description="Branching Volterra-Gaussian particle systems: simulation and verification",
    )
    parser.add_argument("command", choices=["simulate", "moments", "kernel", "conditions", "lln"])
    parser.add_argument("-c", "--config", required=True, help="experiment configuration (INI)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    parser.add_argument("--threads", default=None, help="worker count (overrides config)")
    parser.add_argument("--replicates", type=int, default=None, help="replicate count (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    parser.add_argument("--output", default=None, help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.threads is not None:
        overrides.append(f"simulation.threads={args.threads}")
    if args.replicates is not None:
        overrides.append(f"simulation.replicates={args.replicates}")
    if args.seed is not None:
        overrides.append(f"simulation.root_seed={args.seed}")
    if args.output is not None:
        overrides.append(f"output.dir={args.output}")
    try:
        cfg = ExperimentConfig.from_ini(args.config, overrides)
        handler = {
            "kernel": cmd_kernel,
            "simulate": cmd_simulate,
            "moments": cmd_moments,
            "conditions": cmd_conditions,
            "lln": cmd_lln,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, UnsupportedRegimeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CappedRunError as exc:
        print(f"capped run: {exc}", file=sys.stderr)
        return EXIT_CAPPED
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
