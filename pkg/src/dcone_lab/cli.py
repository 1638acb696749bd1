"""Command-line runner: ``dcone-lab <command> [--config PATH] [--out DIR] [--threads N] [--seed S]``.

Every command writes into ``<out>/<command>/`` and finishes with a
``manifest.json`` listing the files it produced. Exit codes: 0 success,
1 domain failure (inadmissible profile, unconverged minimisation, no
witness), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from .ansatz import QuadratureSpec, SmoothedCone, ansatz_sweep, dual_exponent
from .config import ExperimentConfig, config_from_dict, load_config
from .degree import boundary_curve, degree_field, exponent_table, find_test_function, pullback_identity_check
from .errors import ConfigError, DconeError, NoWitness
from .grid import BoundaryCondition, build_grid, core_grid, read_snapshot, snapshot_text, sweep_grid
from .io import RunManifest, atomic_write_text, csv_text, json_text, now_iso
from .minimize import ScalingEntry, continuation_run, fit_loglog
from .energy import EnergyBreakdown
from .profile import build_trace, check_admissibility

logger = logging.getLogger("dcone_lab")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
ANSATZ_COLUMNS = ["h", "core_radius", "E_membrane", "E_bending_raw", "E_bending", "E_total"]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class Run:
    """Output directory plus manifest bookkeeping for one command."""

    def __init__(self, command: str, cfg: ExperimentConfig, out_root, seed: int):
        self.dir = Path(out_root) / command
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.manifest = RunManifest(command, cfg.to_dict(), _version(), seed)

    def text(self, name: str, text: str) -> None:
        atomic_write_text(self.dir / name, text)
        if name not in self.files:
            self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, json_text(obj))

    def csv(self, name: str, rows, columns=None) -> None:
        self.text(name, csv_text(rows, columns))

    def finish(self, status: str) -> None:
        self.manifest.status = status
        self.manifest.finished = now_iso()
        self.manifest.files = {}
        self.manifest.record_files(self.dir, self.files)
        self.manifest.write(self.dir)


# ----------------------------------------------------------------- commands


def cmd_validate_profile(cfg: ExperimentConfig, args) -> int:
    run = Run("validate-profile", cfg, args.out, args.seed)
    rep = check_admissibility(cfg.profile)
    run.json(
        "profile_report.json",
        {
            "cos_coeffs": list(cfg.profile.cos_coeffs),
            "sin_coeffs": list(cfg.profile.sin_coeffs),
            "condition1": rep.condition1,
            "condition1_closed_form": rep.condition1_closed,
            "condition2": rep.condition2,
            "admissible": rep.admissible,
            "violated": rep.violated(),
        },
    )
    print(f"condition1 (quadrature)  = {rep.condition1:.6e}")
    print(f"condition1 (closed form) = {rep.condition1_closed:.6e}")
    print(f"condition2               = {rep.condition2:.6e}")
    if rep.admissible:
        print("admissible")
        run.finish("complete")
        return EXIT_OK
    print("inadmissible: " + "; ".join(rep.violated()))
    run.finish("inadmissible")
    return EXIT_DOMAIN


def cmd_ansatz_sweep(cfg: ExperimentConfig, args) -> int:
    run = Run("ansatz-sweep", cfg, args.out, args.seed)
    trace = _trace_or_fail(cfg)
    if trace is None:
        run.finish("inadmissible")
        return EXIT_DOMAIN
    rows = ansatz_sweep(trace, cfg.p, cfg.ansatz_h, QuadratureSpec(), threads=args.threads)
    run.csv("ansatz_sweep.csv", [r.as_row() for r in rows], ANSATZ_COLUMNS)
    hs = [r.h for r in rows]
    if len(hs) < 2:
        warnings.warn("slope fit needs at least two h values; reporting NaN", stacklevel=1)
    slope, intercept, stderr = fit_loglog(hs, [r.breakdown.total for r in rows])
    fit = {
        "p": cfg.p,
        "fitted_slope": slope,
        "slope_stderr": stderr,
        "intercept": intercept,
        "theoretical_slope": dual_exponent(cfg.p),
        "n_points": len(hs),
    }
    run.json("ansatz_fit.json", fit)
    print(f"fitted slope {slope:.6f} (theory p' = {dual_exponent(cfg.p):.6f}), {len(hs)} points")
    run.finish("complete")
    return EXIT_OK


ENTRIES = "scaling_entries.json"


def _entry_to_dict(e: ScalingEntry) -> dict:
    d = asdict(e)
    d["breakdown"] = asdict(e.breakdown)
    return d


def _entry_from_dict(d: dict) -> ScalingEntry:
    d = dict(d)
    d["breakdown"] = EnergyBreakdown(**{k: float(v) for k, v in d["breakdown"].items()})
    d["final_grad_norm"] = float(d["final_grad_norm"])
    d["ansatz_total"] = float(d["ansatz_total"])
    return ScalingEntry(**d)


def _sweep_grid(cfg: ExperimentConfig):
    gc = cfg.grid
    if gc.grading_ratio is None and gc.r_min is None:
        return sweep_grid(gc.Nr, gc.n_theta, min(cfg.h_schedule), cfg.p, gc.cells_per_core)
    return build_grid(gc.Nr, gc.n_theta, gc.grading_ratio or 1.0, gc.r_min)


def cmd_minimize_sweep(cfg: ExperimentConfig, args) -> int:
    run = Run("minimize-sweep", cfg, args.out, args.seed)
    trace = _trace_or_fail(cfg)
    if trace is None:
        run.finish("inadmissible")
        return EXIT_DOMAIN
    grid = _sweep_grid(cfg)
    bc = BoundaryCondition.from_trace(grid, trace)

    resume, resume_state = [], None
    old = RunManifest.load(run.dir)
    if old is not None and not args.fresh:
        if old.config_digest == run.manifest.config_digest and old.seed == args.seed and old.status != "complete":
            try:
                stored = json.loads((run.dir / ENTRIES).read_text())
                resume = [_entry_from_dict(d) for d in stored["entries"]]
                if resume:
                    resume_state = read_snapshot(run.dir / stored["last_state"], grid, bc)
                run.files = list(old.files)
                run.manifest.started = old.started
                logger.info("resuming: %d entries already done", len(resume))
            except (OSError, KeyError, ValueError) as exc:
                logger.warning("cannot resume (%s); starting over", exc)
                resume, resume_state = [], None
    if not resume:
        _clear(run)

    done = list(resume)

    def on_entry(entry: ScalingEntry, state):
        done.append(entry)
        k = cfg.h_schedule.index(entry.h)
        snap = f"state_h{k}.csv"
        run.text(snap, snapshot_text(state))
        run.json(ENTRIES, {"entries": [_entry_to_dict(e) for e in done], "last_state": snap})
        run.manifest.entries = [{"h": e.h, "status": _status(e)} for e in done]
        run.finish("running")

    report = continuation_run(
        trace, cfg.p, cfg.minimizer, grid, on_entry=on_entry, resume=resume, resume_state=resume_state,
        seed=args.seed, threads=args.threads,
    )
    run.json("scaling_report.json", report.to_dict())
    run.csv("scaling_report.csv", [e.as_row() for e in report.entries])
    run.manifest.entries = [{"h": e.h, "status": _status(e)} for e in report.entries]
    print(f"fitted slope {report.fitted_slope:.6f} +- {report.slope_stderr:.3g} (theory p' = {report.theoretical_slope:.6f})")
    for e in report.entries:
        print(f"  h={e.h:<8g} E={e.breakdown.total:.6e}  ansatz={e.ansatz_total:.6e}  {_status(e)}")
    unconverged = [e for e in report.entries if not e.converged]
    run.finish("complete")
    if unconverged:
        print(f"{len(unconverged)} of {len(report.entries)} entries did not reach grad_tol")
        return EXIT_DOMAIN
    return EXIT_OK


def _status(e: ScalingEntry) -> str:
    if e.converged:
        return "converged"
    return e.message or "unconverged"


def _clear(run: Run) -> None:
    old = RunManifest.load(run.dir)
    if old is None:
        return
    for name in old.files:
        (run.dir / name).unlink(missing_ok=True)


def cmd_degree_map(cfg: ExperimentConfig, args) -> int:
    run = Run("degree-map", cfg, args.out, args.seed)
    dc = cfg.degree
    curve = boundary_curve(cfg.profile)
    field = degree_field(curve, resolution=dc.resolution, margin=dc.margin)
    X, Y = np.meshgrid(field.x, field.y, indexing="ij")
    run.csv(
        "degree_field.csv",
        [{"z1": a, "z2": b, "deg": int(d)} for a, b, d in zip(X.ravel(), Y.ravel(), field.values.ravel())],
        ["z1", "z2", "deg"],
    )
    report = {"nonzero_area": field.nonzero_area(), "max_residual": float(field.residual.max())}
    try:
        w = find_test_function(field, curve)
    except NoWitness as exc:
        report["witness"] = None
        report["error"] = str(exc)
        run.json("witness.json", report)
        print(f"no witness: {exc}")
        run.finish("no-witness")
        return EXIT_DOMAIN
    report["witness"] = {
        "center": w.phi.center.tolist(),
        "radius": w.phi.radius,
        "amplitude": w.phi.amplitude,
        "degree": w.degree,
        "integral": w.integral,
    }
    status = "complete"
    rep = check_admissibility(cfg.profile)
    if rep.admissible:
        trace = build_trace(cfg.profile)
        sc = SmoothedCone(trace, dc.h, cfg.p)
        grid = core_grid(dc.Nr, dc.n_theta, sc.core_radius)
        chk = pullback_identity_check(sc, w.phi, grid, field)
        report["pullback"] = {"h": dc.h, "lhs": chk.lhs, "rhs": chk.rhs, "rel_err": chk.rel_err}
        print(f"pullback identity: lhs={chk.lhs:.6e} rhs={chk.rhs:.6e} rel_err={chk.rel_err:.3e}")
    else:
        report["pullback"] = None
    run.json("witness.json", report)
    print(f"degree {w.degree} witness at {w.phi.center.round(6).tolist()}, r={w.phi.radius:.4g}: integral {w.integral:.6e}")
    run.finish(status)
    return EXIT_OK


def cmd_exponents(cfg: ExperimentConfig, args) -> int:
    run = Run("exponents", cfg, args.out, args.seed)
    p = args.p if args.p is not None else cfg.p
    try:
        t = exponent_table(p)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish("domain-error")
        return EXIT_DOMAIN
    row = {"p": p, **t._asdict()}
    run.json("exponents.json", row)
    for k, v in row.items():
        print(f"{k:18s} {v:.12g}")
    run.finish("complete")
    return EXIT_OK


def _trace_or_fail(cfg: ExperimentConfig):
    rep = check_admissibility(cfg.profile)
    if not rep.admissible:
        print("inadmissible profile: " + "; ".join(rep.violated()), file=sys.stderr)
        return None
    return build_trace(cfg.profile)


COMMANDS = {
    "validate-profile": (cmd_validate_profile, "check the admissibility conditions of the boundary profile"),
    "ansatz-sweep": (cmd_ansatz_sweep, "energy of the smoothed cone over an h sweep, with log-log slope"),
    "minimize-sweep": (cmd_minimize_sweep, "minimise the discrete energy along the h schedule"),
    "degree-map": (cmd_degree_map, "winding-number field of the boundary gradient and a positive witness"),
    "exponents": (cmd_exponents, "exponent identities for a bending exponent p"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
    common.add_argument("--out", metavar="DIR", help="output root (default: config output_dir)")
    common.add_argument("--threads", metavar="N", type=int, default=1, help="worker threads")
    common.add_argument("--seed", metavar="S", type=int, help="seed for perturbed starts")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser = argparse.ArgumentParser(prog="dcone-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=helptext, description=helptext)
        if name == "minimize-sweep":
            sp.add_argument("--fresh", action="store_true", help="ignore a resumable previous run")
        if name == "exponents":
            sp.add_argument("--p", type=float, help="bending exponent (default: config p)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    if not hasattr(args, "fresh"):
        args.fresh = False
    if not hasattr(args, "p"):
        args.p = None
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is None:
            args.seed = cfg.seed
        elif args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.out is None:
            args.out = cfg.output_dir
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handler = COMMANDS[args.command][0]
    try:
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DconeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
