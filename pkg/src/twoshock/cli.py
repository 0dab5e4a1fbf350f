"""Command-line entry point: ``twoshock {profile,run,check-inequalities,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import load_scenario, parse_m_constant, parse_scenario
from .diagnostics import read_ledger_csv, write_ledger_csv
from .errors import TwoShockError
from .profiles import certify_tail_bounds
from .scenario import build_profiles, build_riemann, check, evaluate_run, simulate, verify_suite
from .shifts import read_shift_log
from .solver import write_snapshot_csv, write_snapshot_npz

log = logging.getLogger("twoshock")


def _dump(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def _riemann_dict(cfg) -> dict:
    s1, s2 = cfg.speeds(1), cfg.speeds(2)
    return {
        "v_minus": cfg.v_minus, "u_minus": cfg.u_minus, "v_mid": cfg.v_mid, "u_mid": cfg.u_mid,
        "v_plus": cfg.v_plus, "u_plus": cfg.u_plus, "delta1": cfg.delta1, "delta2": cfg.delta2,
        "sigma1_star": s1[0], "sigma1": s1[1], "sigma2_star": s2[0], "sigma2": s2[1],
        "rh_residual": float(np.max(np.abs(cfg.rh_residuals()))),
    }


def _profile_checks(cfg, profiles) -> tuple[list, dict]:
    checks = [check("rh_residual", "Rankine-Hugoniot residuals", float(np.max(np.abs(cfg.rh_residuals()))), 1e-12,
                    float(np.max(np.abs(cfg.rh_residuals()))) < 1e-12)]
    tails = {}
    for prof in profiles:
        rep = certify_tail_bounds(prof)
        tails[f"family{prof.family}"] = asdict(rep)
        sign = -1.0 if prof.family == 1 else 1.0
        mono = bool(np.all(sign * np.asarray(prof.dv_tab) > 0))
        checks.append(check(f"profile{prof.family}_monotone", "strict monotonicity of the shock profile",
                            float(mono), 1.0, mono))
        end = max(abs(prof.v_tab[0] - prof.v_left), abs(prof.v_tab[-1] - prof.v_right))
        checks.append(check(f"profile{prof.family}_endpoints", "profile reaches its end states", end, 1e-8,
                            end < 1e-8))
        checks.append(check(f"profile{prof.family}_tail_decay", "slope decays monotonically away from the layer",
                            float(rep.monotone_decay), 1.0, rep.monotone_decay))
    return checks, tails


def cmd_profile(args) -> int:
    sc = load_scenario(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = build_riemann(sc)
    profiles = build_profiles(cfg)
    for prof in profiles:
        prof.to_csv(out / f"profile_{prof.family}.csv")
    checks, tails = _profile_checks(cfg, profiles)
    summary = {"command": "profile", "scenario": sc.source, "riemann": _riemann_dict(cfg), "tails": tails,
               "checks": checks, "all_pass": all(c["pass"] for c in checks)}
    sys.stdout.write(_dump(summary, out / "profile_summary.json"))
    return 0 if summary["all_pass"] else 1


def cmd_run(args) -> int:
    sc = load_scenario(args.config)
    m_factor = parse_m_constant(args.m_constant) if args.m_constant else sc.m_factor
    out = Path(args.out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    (out / "scenario.cfg").write_text(sc.raw_text)

    res = simulate(sc, m_factor)
    for prof in res.profiles:
        prof.to_csv(out / f"profile_{prof.family}.csv")
    fmt = sc.run.get("snapshot_format", "npz")
    for k, snap in enumerate(res.trajectory.snapshots):
        path = out / "snapshots" / f"snapshot_{k:04d}.{fmt}"
        (write_snapshot_csv if fmt == "csv" else write_snapshot_npz)(snap, path)
    res.engine.write_log(out / "shift_log.csv")
    write_ledger_csv(res.ledger, out / "ledger.csv")

    s1, s2 = res.profiles[0].sigma, res.profiles[1].sigma
    checks = evaluate_run(res.ledger, res.engine.rows, s1, s2, sc.checks)
    c = res.engine.constants
    summary = {
        "command": "run",
        "scenario": sc.source,
        "seed": args.seed,
        "riemann": _riemann_dict(res.config),
        "weights": {"nu1": res.weights.nu1, "nu2": res.weights.nu2},
        "shift_constants": {"sigma_m": c.sigma_m, "alpha_m": c.alpha_m, "M": c.M, "m_factor": c.m_factor},
        "initial_norms": asdict(res.norms),
        "steps": res.trajectory.n_steps,
        "dt": res.trajectory.dt,
        "separation_warnings": len(res.warnings),
        "final": {"X1": res.engine.rows[-1][1], "X2": res.engine.rows[-1][2],
                  "E_weighted": res.ledger[-1].E_weighted, "sup_v_dev": res.ledger[-1].sup_v_dev},
        "checks": checks,
        "all_pass": all(ch["pass"] for ch in checks),
    }
    _dump({"wall_clock_s": res.trajectory.wall_clock, "steps": res.trajectory.n_steps,
           "mean_step_s": float(np.mean(res.trajectory.step_times))}, out / "run_stats.json")
    sys.stdout.write(_dump(summary, out / "summary.json"))
    return 0 if summary["all_pass"] else 1


def cmd_check(args) -> int:
    report = verify_suite(args.seed, args.threads)
    path = None
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(args.out_dir) / f"inequalities_seed{args.seed}.json"
    sys.stdout.write(_dump(report, path))
    return 0 if report["all_pass"] else 1


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    sc = parse_scenario((out / "scenario.cfg").read_text(), source=str(out / "scenario.cfg"))
    previous = json.loads((out / "summary.json").read_text())
    ledger = read_ledger_csv(out / "ledger.csv")
    shifts = read_shift_log(out / "shift_log.csv")
    rows = np.column_stack([shifts[name] for name in shifts.dtype.names])
    r = previous["riemann"]
    checks = evaluate_run(ledger, rows, r["sigma1"], r["sigma2"], sc.checks)
    summary = {"command": "report", "scenario": previous["scenario"], "checks": checks,
               "all_pass": all(ch["pass"] for ch in checks)}
    sys.stdout.write(_dump(summary, out / "report.json"))
    return 0 if summary["all_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twoshock", description="Two-shock Navier-Stokes stability laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="scenario file")
        sp.add_argument("--out-dir", default="twoshock_out")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--m-constant", default=None, help="5/4, 4/3 or a number (multiple of sigma_m^4 v_m^2 alpha_m)")

    common(sub.add_parser("profile", help="build and export the two shock profiles"))
    common(sub.add_parser("run", help="evolve a perturbed composite wave with shifts"))
    common(sub.add_parser("check-inequalities", help="seeded property suites"), config=False)
    common(sub.add_parser("report", help="re-evaluate checks of an existing run directory"), config=False)
    return p


COMMANDS = {"profile": cmd_profile, "run": cmd_run, "check-inequalities": cmd_check, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "check-inequalities" and args.out_dir == "twoshock_out":
        args.out_dir = None
    try:
        return COMMANDS[args.command](args)
    except TwoShockError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
