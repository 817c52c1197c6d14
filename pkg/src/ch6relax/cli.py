"""Command-line front end: ``ch6relax simulate | sweep-tau | verify | report``.

Exit status: 0 on success, 1 when ``verify`` has failing checks, 2 for
configuration, runtime step and missing-file errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import ExitStack
from pathlib import Path
from unittest import mock

import numpy as np

from ch6relax import __version__
from ch6relax import config as cfgmod
from ch6relax import io
from ch6relax.checks import CHECKS, CheckContext, run_checks
from ch6relax.exceptions import ConfigError, NumericalOverflowError, StepSizeError
from ch6relax.galerkin import GalerkinSystem
from ch6relax.integrators import StepConfig, init_state, run
from ch6relax.lab import (ErrorReport, StabilityMonitor, SweepSpec, mu_time_integral_monitor,
                          reference_error_estimate, run_sweep, stability_report)
from ch6relax.sobolev import NormKind, energy, norm

logger = logging.getLogger("ch6relax")


def _fail(message, code=2):
    print(f"error: {message}", file=sys.stderr)
    return code


def _out_dir(args, cfg):
    out = args.out or (cfg.output if cfg is not None else None)
    if out is None:
        raise ConfigError("output", "no output directory (use --out or the 'output' key)")
    return io.ensure_dir(out)


def _sample_monitor(system, tau):
    d, p = system.domain, system.potential

    def monitor(state):
        w, mu, _ = system.fields(state.phi, state.t)
        e = energy(d, state.phi, p, state.t)
        row = {
            "energy": e.total,
            "willmore": e.willmore_part,
            "ginzburg_landau": e.gl_part,
            "mean": d.mean(state.phi),
            "phi_Vstar": norm(d, state.phi, NormKind.Vstar),
            "phi_W": norm(d, state.phi, NormKind.W),
            "mu_Wstar": norm(d, mu, NormKind.Wstar),
            "w_H": norm(d, w, NormKind.H),
        }
        if tau > 0:
            row["rho_Vstar"] = norm(d, state.rho, NormKind.Vstar)
            row["lyapunov"] = e.total + 0.5 * tau * row["rho_Vstar"] ** 2
        return row

    return monitor


# -- subcommands ----------------------------------------------------------------------

def cmd_simulate(args):
    cfg = cfgmod.load(args.config)
    if cfg.tau is None:
        raise ConfigError("tau", "simulate needs a single tau (tau_list is for sweep-tau)")
    out = _out_dir(args, cfg)
    system = cfg.build_system()
    phi0, rho0 = cfg.initial_data(system.domain)
    state = init_state(system, phi0, rho0 if cfg.tau > 0 else None, cfg.tau)
    step_cfg = StepConfig(cfg.dt, cfg.scheme)
    monitor = StabilityMonitor(system.domain, cfg.dt)
    traj = run(system, state, step_cfg, cfg.T, cfg.save_every, monitor=monitor,
               sample_monitor=_sample_monitor(system, cfg.tau))

    files = ["trajectory_phi.csv", io.MONITORS, io.STABILITY, "snapshot_final.csv"]
    io.write_trajectory(out / "trajectory_phi.csv", traj.times, traj.phi)
    if traj.rho is not None:
        io.write_trajectory(out / "trajectory_rho.csv", traj.times, traj.rho)
        files.append("trajectory_rho.csv")
    io.write_monitors(out / io.MONITORS, traj.times, traj.monitors)
    payload = {"mu_time_integral_V": mu_time_integral_monitor(traj, system) if len(traj) > 1 else 0.0}
    if len(traj) > 1:
        payload.update(stability_report(traj, cfg.tau, system).values())
    payload["diagnostic_potential"] = cfg.potential.diagnostic
    io.write_json(out / io.STABILITY, payload)
    io.write_snapshot(out / "snapshot_final.csv", system.domain, traj.phi[-1], traj.times[-1])
    io.write_manifest(out, cfg, "simulate", files)
    print(f"simulate: {len(traj)} samples to t={traj.times[-1]:.6g}, wrote {out}")
    return 0


def cmd_sweep(args):
    cfg = cfgmod.load(args.config)
    if cfg.tau_list is None or len(cfg.tau_list) < 3:
        raise ConfigError("tau_list", "sweep-tau needs at least 3 tau values")
    if cfg.save_every is None:
        raise ConfigError("save_every", "sweep-tau needs a save interval")
    out = _out_dir(args, cfg)
    system = cfg.build_system()
    phi0, rho0 = cfg.initial_data(system.domain)
    spec = SweepSpec(system, phi0, rho0, cfg.tau_list, cfg.T, cfg.save_every,
                     cfg.ref_dt or cfg.dt, cfg.ref_scheme, cfg.steps_per_tau, cfg.dt)
    result = run_sweep(spec, jobs=args.jobs)
    if args.richardson:
        result.checks["reference_error_C0Vstar"] = reference_error_estimate(
            system, phi0, cfg.T, spec.ref_dt, spec.ref_scheme, cfg.save_every)
    files = [io.ERRORS, io.RATEFIT, io.STABILITY, "trajectory_ref.csv"]
    io.write_errors(out / io.ERRORS, result.errors)
    io.write_json(out / io.RATEFIT, {
        "fits": {k: v.to_dict() for k, v in result.fits.items()},
        "checks": result.checks,
    })
    io.write_json(out / io.STABILITY, {
        "reports": [s.values() | {"tau": s.tau} for s in result.stability],
        "mu_time_integral_V": dict(zip(map(str, result.taus), result.mu_integral)),
    })
    io.write_trajectory(out / "trajectory_ref.csv", result.reference.times, result.reference.phi)
    tags = {}
    for i, traj in enumerate(result.trajectories):
        name = f"trajectory_tau{i}.csv"
        io.write_trajectory(out / name, traj.times, traj.phi)
        tags[name] = traj.tau
        files.append(name)
    io.write_manifest(out, cfg, "sweep-tau", files, {"trajectory_tau": tags})
    fit = result.fits["c0_vstar"]
    print(f"sweep-tau: {len(result.taus)} tau values, C0(V*) slope {fit.slope:.4f} "
          f"(r2 {fit.r_squared:.4f}), wrote {out}")
    return 0


def _flipped_remainder(original):
    def flipped(self, phi, t=None):
        return -original(self, phi, t)
    return flipped


def cmd_verify(args):
    if args.list:
        for name in CHECKS:
            print(name)
        return 0
    ctx = CheckContext()
    if args.config:
        cfg = cfgmod.load(args.config)
        ctx = CheckContext(cfg.domain.build(cfg.potential.degree), cfg.potential, cfg.seed)
    failures = 0
    with ExitStack() as stack:
        if args.inject_fault:
            stack.enter_context(mock.patch.object(
                GalerkinSystem, "nonlinear_remainder",
                _flipped_remainder(GalerkinSystem.nonlinear_remainder)))
        for name, passed, detail in run_checks(ctx, args.check or None):
            failures += not passed
            print(json.dumps({"check": name, "status": "pass" if passed else "fail", "detail": detail}))
    print(json.dumps({"summary": {"checks": len(args.check or CHECKS), "failed": failures}}))
    return 1 if failures else 0


def _load_results(path):
    path = Path(path)
    manifest = io.read_manifest(path)
    for name in manifest.get("files", []):
        if not (path / name).is_file():
            raise io.MissingOutputError(f"missing file listed in manifest: {path / name}")
    entry = {"dir": str(path), "command": manifest.get("command"), "manifest": manifest}
    if entry["command"] == "sweep-tau":
        entry["errors"] = io.read_csv_table(path / io.ERRORS)
        entry["fits"] = io.read_json(path / io.RATEFIT)["fits"]
    elif entry["command"] == "simulate":
        entry["monitors"] = io.read_csv_table(path / io.MONITORS)
    else:
        raise io.MissingOutputError(f"corrupt manifest in {path}: unknown command {entry['command']!r}")
    return entry


def cmd_report(args):
    results = [_load_results(p) for p in args.dirs]
    sweeps = [r for r in results if r["command"] == "sweep-tau"]
    sims = [r for r in results if r["command"] == "simulate"]
    cols = ErrorReport.FIELDS
    rows = []

    if sweeps:
        taus = sorted({float(t) for r in sweeps for t in r["errors"]["tau"]}, reverse=True)
        header = ["tau"] + [f"{c}[{i}]" if len(sweeps) > 1 else c
                            for i in range(len(sweeps)) for c in cols]
        for tau in taus:
            row = [tau]
            for r in sweeps:
                hit = np.nonzero(r["errors"]["tau"] == tau)[0]
                row += [r["errors"][c][hit[0]] if hit.size else float("nan") for c in cols]
            rows.append(row)
        for i, r in enumerate(sweeps):
            print(f"[{i}] {r['dir']} (config {r['manifest']['config_hash'][:12]})")
        print("  ".join(f"{h:>16s}" for h in header))
        for row in rows:
            print("  ".join(f"{v:16.6e}" for v in row))
        print("fitted slope (r2):")
        for i, r in enumerate(sweeps):
            fits = r["fits"]
            print(f"  [{i}] " + "  ".join(f"{c} {fits[c]['slope']:.4f} ({fits[c]['r_squared']:.4f})"
                                         for c in cols))
        out = Path(args.out) if args.out else Path(sweeps[0]["dir"])
        io.ensure_dir(out)
        io.write_rows(out / "report.csv", header, rows)
        print(f"wrote {out / 'report.csv'}")

    for r in sims:
        m = r["monitors"]
        last = {k: v[-1] for k, v in m.items()}
        print(f"{r['dir']}: t={last['t']:.6g} " + " ".join(f"{k}={v:.6e}" for k, v in last.items() if k != "t"))
    return 0


# -- entry point ------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="ch6relax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration and write trajectory files")
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-tau", help="tau sweep against the tau = 0 reference")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1, help="parallel tau runs (default 1)")
    p.add_argument("--no-richardson", dest="richardson", action="store_false",
                   help="skip the Richardson estimate of the reference error")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the built-in identity and oracle checks")
    p.add_argument("--config", help="take domain and potential from this config")
    p.add_argument("--list", action="store_true", help="print check names and exit")
    p.add_argument("--check", action="append", choices=list(CHECKS), help="run only this check")
    p.add_argument("--inject-fault", action="store_true",
                   help="flip the sign of the nonlinear remainder (the checks should fail)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarize one or more result directories")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="directory for report.csv (default: first sweep dir)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(f"invalid config: {exc}")
    except (StepSizeError, NumericalOverflowError) as exc:
        return _fail(f"step failed: {exc}")
    except (io.MissingOutputError, FileNotFoundError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
