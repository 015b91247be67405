"""Command-line harness: verification suites, sweeps, solver runs, reports.

Exit codes: 0 all checks passed, 1 usage or configuration error, 2 at
least one check failed (the failing checks are named on stderr).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

from .report import fmt
from .suite import CHECKS, FAST_SUITE, RunConfig, run_suite, sweep

USAGE_ERROR, CHECK_FAILED = 1, 2


def load_config_file(path) -> dict:
    """Simple key = value lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key] = val
    return out


def build_config(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    numeric = {f.name: f.type for f in dc_fields(RunConfig)}
    cfg = RunConfig()
    for key, raw in values.items():
        if key in ("suite", "check", "sweep_axis", "sweep_values"):
            continue
        if key not in numeric:
            raise ValueError(f"unknown config key {key!r}")
        cur = getattr(cfg, key)
        setattr(cfg, key, type(cur)(raw) if cur is not None else raw)
    for key in ("nu", "nu_prime", "F", "n", "length", "seed", "t_final", "dt",
                "velocity_amp", "forcing_amp"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    out_dir = getattr(args, "output_dir", None) or values.get("output_dir")
    cfg.output_dir = os.environ.get("QG3_OUTPUT_DIR", out_dir or cfg.output_dir)
    return cfg


def write_reports(reports, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    summary_rows = []
    for rep in reports:
        stem = rep.name.replace("/", "-")
        rep.write_csv(os.path.join(out_dir, f"{stem}.csv"))
        rep.write_dat(os.path.join(out_dir, f"{stem}.dat"))
        summary_rows.append((rep.name, rep.passed, rep.fitted))
    with open(os.path.join(out_dir, "report.csv"), "w") as fh:
        fh.write("check_id,pass,fitted\n")
        for name, ok, fitted in summary_rows:
            pack = ";".join(f"{k}={fmt(v)}" for k, v in sorted(fitted.items()))
            fh.write(f"{name},{fmt(ok)},{pack}\n")


def add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--nu", type=float)
    p.add_argument("--nu-prime", dest="nu_prime", type=float)
    p.add_argument("--F", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--L", dest="length", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--dt", type=float)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qg3",
        description="verification harness for the anisotropic nonlocal "
                    "diffusion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run named checks or a suite")
    p_verify.add_argument("checks", nargs="+",
                          help="check names, 'fast', or 'all'")
    add_common(p_verify)

    p_sweep = sub.add_parser("sweep", help="run one check across an axis")
    p_sweep.add_argument("--axis", required=True,
                         choices=("F", "nu_ratio", "j", "V"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--check", required=True)
    add_common(p_sweep)

    p_tdqg = sub.add_parser("solve-tdqg", help="run a forced transport-diffusion "
                                               "problem and archive it")
    add_common(p_tdqg)
    p_tdqg.add_argument("--velocity-amp", dest="velocity_amp", type=float)
    p_tdqg.add_argument("--forcing-amp", dest="forcing_amp", type=float)

    p_qg = sub.add_parser("solve-qg", help="run the self-consistent system")
    add_common(p_qg)
    p_qg.add_argument("--amplitude", type=float, default=0.3)

    p_rep = sub.add_parser("report", help="estimate checks on a stored archive")
    p_rep.add_argument("archive", help="directory written by solve-tdqg/solve-qg")
    add_common(p_rep)

    try:
        args = parser.parse_args(argv)
        cfg = build_config(args)
    except (ValueError, OSError) as exc:
        print(f"qg3: {exc}", file=sys.stderr)
        return USAGE_ERROR

    try:
        if args.command == "verify":
            names = args.checks
            if names == ["all"]:
                names = list(CHECKS)
            elif names == ["fast"]:
                names = list(FAST_SUITE)
            unknown = [nm for nm in names if nm not in CHECKS]
            if unknown:
                print(f"qg3: unknown checks {unknown}; available: "
                      f"{', '.join(CHECKS)}", file=sys.stderr)
                return USAGE_ERROR
            reports, ok = run_suite(cfg, names)
            write_reports(reports, cfg.output_dir)
            for rep in reports:
                print(rep.summary())
            if not ok:
                failing = [r.name for r in reports if not r.passed]
                print(f"qg3: failed checks: {', '.join(failing)}", file=sys.stderr)
                return CHECK_FAILED
            return 0

        if args.command == "sweep":
            if args.check not in CHECKS:
                print(f"qg3: unknown check {args.check!r}", file=sys.stderr)
                return USAGE_ERROR
            values = [v for v in args.values.split(",") if v]
            rows = sweep(cfg, args.axis, values, args.check)
            os.makedirs(cfg.output_dir, exist_ok=True)
            path = os.path.join(cfg.output_dir, f"sweep-{args.check}-{args.axis}.csv")
            keys = sorted({k for _, reps, _ in rows for r in reps
                           for k in r.fitted})
            with open(path, "w") as fh:
                fh.write(",".join([args.axis, "pass"] + keys) + "\n")
                for v, reps, ok in rows:
                    fitted = {}
                    for r in reps:
                        fitted.update(r.fitted)
                    cells = [str(v), fmt(ok)] + [fmt(fitted.get(k, "")) for k in keys]
                    fh.write(",".join(cells) + "\n")
            print(f"wrote {path}")
            if not all(ok for _, _, ok in rows):
                return CHECK_FAILED
            return 0

        if args.command == "solve-tdqg":
            from .suite import RunContext

            sol = RunContext(cfg).solution()
            out = os.path.join(cfg.output_dir, "tdqg-archive")
            sol.save(out)
            print(f"archived {len(sol.fields)} snapshots to {out}")
            print(f"velocity bound C' = {sol.v_l6:.6f}, "
                  f"gradient budget V(T) = {sol.v_grad_int:.6f}")
            return 0

        if args.command == "solve-qg":
            from .fields import random_band_limited
            from .grid import Grid3, ScalarField
            from .solver import solve_qg

            grid = Grid3(cfg.n, cfg.length)
            rng = cfg.rng("solve-qg")
            om = random_band_limited(grid, rng, 1, grid.nyquist / 4)
            om = ScalarField(grid, args.amplitude
                             * (om.values - om.values.mean()))
            sol = solve_qg(om, cfg.params, t_final=cfg.t_final, dt=cfg.dt)
            out = os.path.join(cfg.output_dir, "qg-archive")
            sol.save(out)
            print(f"archived {len(sol.fields)} snapshots to {out}; "
                  f"C' = {sol.v_l6:.6f}")
            return 0

        if args.command == "report":
            import json

            from .grid import lp_norm, read_snapshot

            manifest = json.load(open(os.path.join(args.archive, "manifest.json")))
            times = np.array(manifest["times"])
            snaps = sorted(f for f in os.listdir(args.archive)
                           if f.endswith(".qg3f"))
            norms = [lp_norm(read_snapshot(os.path.join(args.archive, f)), 2)
                     for f in snaps]
            os.makedirs(cfg.output_dir, exist_ok=True)
            path = os.path.join(cfg.output_dir, "archive-report.csv")
            with open(path, "w") as fh:
                fh.write("t,l2_norm\n")
                for t, nv in zip(times, norms):
                    fh.write(f"{fmt(float(t))},{fmt(float(nv))}\n")
            print(f"hypotheses: {manifest['hypotheses']}")
            print(f"wrote {path}")
            return 0
    except Exception as exc:  # surface check errors with a clean exit code
        print(f"qg3: {exc}", file=sys.stderr)
        return CHECK_FAILED

    return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
