"""Command-line front end: ``visual-tracking {run,audit,sweep,validate-config}``.

Exit codes: 0 ok, 2 configuration error, 3 runtime fault, 4 audit failure.
"""
import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis as an
from . import config as cfgmod
from . import report
from . import sim
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_FAULT, EXIT_AUDIT = 0, 2, 3, 4

SWEEP_METRICS = ["completed", "final_time", "max_abs_dx_after_settle", "max_abs_dxo_after_settle",
                 "terminal_abs_dx", "terminal_abs_dxo", "depth_rel_error_initial",
                 "depth_rel_error_terminal", "V1_violations", "V2_violations", "min_depth"]


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def load_config(args):
    """Resolve ``--config`` / ``--preset`` plus ``--override`` into a config."""
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    cfg = cfgmod.load(args.config) if args.config else cfgmod.load_preset(args.preset or "paper-sec4")
    return cfg.with_overrides(args.override or [])


def _outdir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _snapshot(fault):
    st = fault.state
    state = None if st is None else {k: np.asarray(getattr(st, k)).tolist() for k in
                                     ("q", "qdot", "x_o", "a_d_hat", "a_z_hat", "a_z_perp_hat",
                                      "t", "integral")}
    return {"message": str(fault), "t": fault.t, "cause": repr(fault.cause), "state": state}


# -- verbs ----------------------------------------------------------------------

def cmd_validate(args):
    cfg = load_config(args)
    sim.build(cfg, args.allow_theorem_violation)
    print(f"ok: {cfg.source}")
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args)
    loop, state = sim.build(cfg, args.allow_theorem_violation)
    out = _outdir(args.outdir)
    log = sim.run(cfg, loop=loop, state=state)
    report.write_run_artifacts(log, cfg, out, figures=not args.no_figures)
    s = log.summary
    if log.fault is not None:
        report.write_json(out / "fault_state.json", _snapshot(log.fault))
        _err(f"runtime fault at t={log.fault.t}: {log.fault}")
        return EXIT_FAULT
    print(f"completed {s['steps']} logged steps to t={s['final_time']:g} s "
          f"in {s['wall_time_s']:.1f} s wall")
    print(f"max |dx| after settle: {s['max_abs_dx_after_settle']:.4g} px, "
          f"max |dx_o| after settle: {s['max_abs_dxo_after_settle']:.4g} px")
    print(f"depth relative error: {s['depth_rel_error_initial']:.4g} -> "
          f"{s['depth_rel_error_terminal']:.4g}")
    print(f"artifacts in {out}")
    return EXIT_OK


def _audit_reports(cfg, trajectory=None):
    loop, _ = sim.build(cfg, allow_theorem_violation=True)
    cam, model, gains = loop.cam, loop.model, loop.gains
    features = np.asarray(cfg.get("audit.features"), dtype=float)
    samples = cfg.get("audit.samples")
    pixel_range = cfg.get("audit.pixel_range")
    seed = cfg.get("sim.seed")

    reports = an.identity_suite(cam, model, samples, seed)
    reports.append(an.skew_symmetry_audit(model, samples, seed))
    reports.append(an.rigid_body_audit(model, seed=seed))
    for m in range(1, min(len(features), 3) + 1):
        reports.append(an.rank_audit(cam, features[:m], samples, pixel_range, seed))
        reports.append(an.synthetic_arm_rank_audit(cam, features[:m], 200, pixel_range, seed))
    grid = np.linspace(-np.pi, np.pi, 13)
    qs = np.array(np.meshgrid(grid, grid, grid, indexing="ij")).reshape(3, -1).T
    reports.append(an.jacobian_rank_workspace_audit(model, cam, qs))
    reports.append(an.workspace_depth_audit(model, cam, 10000, seed))
    reports.append(an.h_matrix_audit(gains.alpha, gains.gamma))
    if trajectory is not None:
        data = np.genfromtxt(trajectory, delimiter=",", names=True)
        qs_run = np.column_stack([data["q1"], data["q2"], data["q3"]])
        x_mid = 0.5 * np.column_stack([data["xo_u"] + data["xd_u"], data["xo_v"] + data["xd_v"]])
        reports.append(an.projection_region_audit(loop.region, qs_run, x_mid, seed=seed))
        reports.append(an.jacobian_rank_workspace_audit(model, cam, qs_run[:: max(1, len(qs_run) // 500)]))
        reports[-1].name = "rank J(q,x) along trajectory"
    return reports


def cmd_audit(args):
    cfg = load_config(args)
    out = _outdir(args.outdir)
    reports = _audit_reports(cfg, args.trajectory)
    lines = [r.line() for r in reports]
    (out / "audit_report.txt").write_text("\n".join(lines) + "\n")
    report.write_json(out / "audit_summary.json",
                      [{"name": r.name, "passed": r.passed, "details": r.details,
                        "violations": r.violations} for r in reports])
    print("\n".join(lines))
    failed = [r for r in reports if not r.passed]
    if failed:
        _err(f"{len(failed)} audit(s) failed")
        return EXIT_AUDIT
    return EXIT_OK


def _sweep_one(job):
    cfg, key, value, allow, run_dir = job
    try:
        cfg = cfg.with_overrides({key: value})
        value = cfg.get(key)
        loop, state = sim.build(cfg, allow)
    except ConfigError as exc:
        return {"value": value, "config_error": str(exc)}
    log = sim.run(cfg, loop=loop, state=state)
    if run_dir is not None:
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        log.write_csv(Path(run_dir) / "trajectory.csv")
    cols = ["t", "q1", "q2", "q3", "dx_u", "dx_v"]
    return {"value": value, "summary": log.summary,
            "fault": None if log.fault is None else str(log.fault),
            "series": log.data[:, [log.columns.index(c) for c in cols]] if len(log) else None}


def convergence_table(results):
    """Self-convergence of q and dx across successively refined step sizes.

    ``results`` are sweep results ordered by decreasing dt. Differences are
    taken at the log times of the coarsest run.
    """
    series = [r["series"] for r in results]
    t0 = np.round(series[0][:, 0], 9)
    sampled = []
    for s in series:
        idx = {tv: k for k, tv in enumerate(np.round(s[:, 0], 9))}
        sampled.append(np.array([s[idx[tv]] for tv in t0 if tv in idx]))
    n = min(len(s) for s in sampled)
    rows = []
    for a, b, ra, rb in zip(sampled, sampled[1:], results, results[1:]):
        dq = float(np.abs(a[:n, 1:4] - b[:n, 1:4]).max())
        ddx = float(np.abs(a[:n, 4:6] - b[:n, 4:6]).max())
        ta, tb = np.linalg.norm(a[n - 1, 4:6]), np.linalg.norm(b[n - 1, 4:6])
        rows.append({"dt_coarse": ra["value"], "dt_fine": rb["value"], "max_diff_q": dq,
                     "max_diff_dx": ddx, "terminal_dx_rel_change": abs(ta - tb) / max(tb, 1e-300)})
    for r0, r1 in zip(rows, rows[1:]):
        ratio = r0["dt_coarse"] / r0["dt_fine"]
        r1["observed_order_q"] = float(np.log(r0["max_diff_q"] / r1["max_diff_q"]) / np.log(ratio))
    return rows


def cmd_sweep(args):
    cfg = load_config(args)
    if not args.values:
        raise ConfigError("sweep needs at least one value")
    key = args.parameter
    cfgmod._split(key)
    values = [cfgmod.parse_value(key, v) for v in args.values]
    out = _outdir(args.outdir)
    jobs = [(cfg, key, v, args.allow_theorem_violation,
             str(out / f"run_{i:02d}") if args.keep_runs else None) for i, v in enumerate(values)]
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(_sweep_one, jobs))

    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([key, "status"] + SWEEP_METRICS)
        for r in results:
            if "config_error" in r:
                w.writerow([json.dumps(r["value"]), "config_error"] + [""] * len(SWEEP_METRICS))
                continue
            status = "ok" if r["fault"] is None else "fault"
            s = r["summary"]
            w.writerow([json.dumps(r["value"]), status]
                       + [format(s[m], ".17g") if isinstance(s.get(m), float) else s.get(m, "")
                          for m in SWEEP_METRICS])
    ok = [r for r in results if r.get("fault", "x") is None]
    if cfgmod._split(key) == ("sim", "dt") and len(ok) >= 2:
        ordered = sorted(ok, key=lambda r: -r["value"])
        rows = convergence_table(ordered)
        fields = ["dt_coarse", "dt_fine", "max_diff_q", "max_diff_dx", "terminal_dx_rel_change",
                  "observed_order_q"]
        with open(out / "convergence.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, restval="")
            w.writeheader()
            w.writerows(rows)
    print((out / "sweep.csv").read_text(), end="")
    if ok:
        return EXIT_OK
    return EXIT_CONFIG if all("config_error" in r for r in results) else EXIT_FAULT


# -- argument parsing -------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="experiment config file (INI)")
    p.add_argument("--preset", help="shipped preset name (default paper-sec4)")
    p.add_argument("--override", action="extend", nargs="+", metavar="KEY=VALUE",
                   help="override a config field; repeatable")
    p.add_argument("--allow-theorem-violation", action="store_true",
                   help="accept gains with alpha <= gamma/3")


def build_parser():
    parser = argparse.ArgumentParser(prog="visual-tracking",
                                     description="Adaptive visual tracking simulations and audits.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="simulate one experiment and write artifacts")
    _common(p)
    p.add_argument("--outdir", default="out")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="rank, identity, dynamics and H-matrix audits")
    _common(p)
    p.add_argument("--outdir", default="out")
    p.add_argument("--trajectory", help="trajectory.csv of a run to audit the projection region along")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="run one simulation per parameter value in parallel")
    _common(p)
    p.add_argument("--outdir", default="out")
    p.add_argument("--parameter", required=True, help="config field, e.g. gains.gamma")
    p.add_argument("--values", nargs="*", default=[], help="values (JSON literals)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--keep-runs", action="store_true", help="write each run's trajectory.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-config", help="check a config without running it")
    _common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
