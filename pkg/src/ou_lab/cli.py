"""Command-line entry point: ``ou-lab verify|evolve|report``.

Exit status: 0 when every check passes, 1 when a mathematical check fails
(including positivity failures along a trajectory), 2 for configuration or
environment errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .config import ConfigError, experiment_config_from_dict, load_config, verify_config_from_dict
from .experiments import (
    DecayFitError,
    check_decay_bound,
    check_entropy_production,
    check_interchange,
    check_near_tightness,
    check_right_continuity,
    check_trajectory_invariants,
    evolve_trajectory,
    fit_decay_rate,
)
from .functionals import PositivityError
from .hermite import NodeBudgetError
from .suite import effective_tolerances, run_verify_suite

log = logging.getLogger("ou_lab")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2

CSV_COLUMNS = ("t", "mass", "entropy", "fisher", "bound", "ratio")

# Human-readable statement of each checked identity, used by ``report``.
CITATIONS = {
    "weitzenbock": "Weitzenboeck formula: L|grad F|^2 = 2<grad F, grad LF> + 2|grad F|^2 + 2||Hess F||^2",
    "bochner_entropy": "Bochner identity for |grad u|^2/u: (L - d/dt)(|grad u|^2/u) = "
                       "(2/u)|grad u|^2 + (2/u)||Hess u - grad u (x) grad u / u||^2",
    "integration_by_parts": "Integration by parts: int (LF) G = -int <grad F, grad G>  (L = -delta o grad)",
    "divergence_adjoint": "Gaussian divergence is the adjoint of the gradient: int delta(Z) G = int <Z, grad G>",
    "generator_paths": "L = sum_i (d_ii - x_i d_i) = -delta o grad, diagonal with eigenvalue -|alpha|",
    "semigroup_symmetry": "Symmetry of the OU semigroup: int u P_t v = int v P_t u",
    "contraction": "L^p contraction: ||P_t u||_p <= ||u||_p",
    "projection_commutes": "Conditional expectation onto H_k commutes with P_t",
    "semigroup_law": "Semigroup law: P_s P_t = P_{s+t}",
    "gradient_commutation": "Gradient commutation: grad P_t F = exp(-t) P_t grad F",
    "backend_agreement": "Mehler formula P_t F(x) = int F(exp(-t) x + sqrt(1 - exp(-2t)) y) dgamma(y) "
                         "agrees with spectral damping",
    "mass_invariance": "Mass invariance: int P_t u = int u",
    "entropy_bound": "Entropy bound from -x log x <= 1 - x: Ent(u) <= 1 - int u",
    "entropy_production": "Entropy production: d/dt Ent(u_t) = -int (log u_t) L u_t = int |grad u_t|^2 / u_t",
    "decay_bound": "Decay bound: d/dt Ent(u_t) <= exp(-2t) int |grad u_0|^2 / u_0",
    "near_tightness": "First-chaos data nearly saturate the decay bound",
    "interchange": "Differentiation under the integral: d/dt int u log u = int [(log u) L u + L u]",
    "right_continuity": "Right continuity of t -> int |grad u_t|^2/u_t at t = 0 (sampled)",
    "mass_conservation": "Mass conservation along the flow",
    "entropy_monotone": "Entropy is non-decreasing along the flow",
    "fisher_monotone": "Fisher information is non-increasing along the flow",
}


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, float):
        return o
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(o, float):
        if math.isnan(o):
            return "nan"
        if math.isinf(o):
            return "inf" if o > 0 else "-inf"
        return o
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if hasattr(o, "item"):
        return _clean(o.item())
    return o


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def write_atomic(path: Path, text: str) -> str:
    """Write via a temporary file and rename; returns the sha256 of the content."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def trajectory_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        # repr gives the shortest string that round-trips the double
        writer.writerow([repr(float(getattr(rec, c))) for c in CSV_COLUMNS])
    return buf.getvalue()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        when = dt.datetime.fromtimestamp(int(epoch), tz=dt.timezone.utc)
    else:
        when = dt.datetime.now(tz=dt.timezone.utc)
    return when.replace(microsecond=0).isoformat()


def write_manifest(out: Path, config: dict, seed: int, files: dict[str, str]) -> Path:
    manifest = {
        "artifact": "ou-lab",
        "version": __version__,
        "seed": seed,
        "timestamp": _timestamp(),
        "config": config,
        "files": [{"path": name, "sha256": digest} for name, digest in sorted(files.items())],
    }
    path = out / "manifest.json"
    write_atomic(path, dumps(manifest))
    return path


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _out_dir(args, raw: dict) -> Path:
    return Path(args.out or raw.get("output") or "ou_lab_out")


def run_verify(args) -> int:
    raw = load_config(args.config)
    cfg = verify_config_from_dict(raw, seed=args.seed)
    reports = run_verify_suite(cfg, args.tolerance_scale)
    summary: dict[str, dict] = {}
    for r in reports:
        s = summary.setdefault(r.identity_name, {"checks": 0, "failed": 0, "worst_rel_residual": 0.0,
                                                 "worst_abs_residual": 0.0, "tolerance": r.tolerance})
        s["checks"] += 1
        s["failed"] += 0 if r.passed else 1
        s["worst_rel_residual"] = max(s["worst_rel_residual"], r.max_rel_residual)
        s["worst_abs_residual"] = max(s["worst_abs_residual"], r.max_abs_residual)
    all_pass = all(r.passed for r in reports)
    doc = {
        "kind": "verify",
        "seed": cfg.seed,
        "tolerance_scale": args.tolerance_scale,
        "tolerances": effective_tolerances(cfg, args.tolerance_scale),
        "config": cfg.to_dict(),
        "all_pass": all_pass,
        "summary": summary,
        "records": [r.to_dict() for r in reports],
    }
    out = _out_dir(args, raw)
    digest = write_atomic(out / "verify_report.json", dumps(doc))
    write_manifest(out, cfg.to_dict(), cfg.seed, {"verify_report.json": digest})
    for name, s in sorted(summary.items()):
        status = "PASS" if s["failed"] == 0 else "FAIL"
        print(f"[{status}] {name}: {s['checks']} checks, worst rel residual {s['worst_rel_residual']:.3e} "
              f"(tol {s['tolerance']:.1e})")
    print(f"report: {out / 'verify_report.json'}")
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def run_evolve(args) -> int:
    raw = load_config(args.config)
    cfg = experiment_config_from_dict(raw, seed=args.seed)
    scale = args.tolerance_scale
    u0 = cfg.initial_density()
    out = _out_dir(args, raw)
    try:
        traj = evolve_trajectory(cfg, u0)
    except PositivityError as exc:
        print(f"positivity failure: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED

    checks = [check_decay_bound(traj, cfg.tolerance("decay_bound") * scale)]
    checks += check_trajectory_invariants(traj, cfg.tolerance("mass") * scale,
                                          cfg.tolerance("monotonicity") * scale)
    try:
        if len(traj) >= 3:
            checks.append(check_entropy_production(traj, u0, cfg, cfg.tolerance("entropy_production") * scale))
        t_mid = traj[len(traj) // 2].t
        checks.append(check_interchange(u0, t_mid, cfg, cfg.tolerance("interchange") * scale))
        checks.append(check_right_continuity(u0, cfg, tolerance=cfg.tolerance("right_continuity") * scale))
    except PositivityError as exc:
        print(f"positivity failure: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    diagnostics = [check_near_tightness(traj, cfg.tolerance("near_tightness") * scale)]

    try:
        exponent = fit_decay_rate(traj)
    except DecayFitError:
        exponent = None
    all_pass = all(c.passed for c in checks)
    summary = {
        "kind": "evolve",
        "seed": cfg.seed,
        "tolerance_scale": scale,
        "config": cfg.to_dict(),
        "initial_coefficients": {",".join(map(str, a)): c for a, c in u0},
        "fitted_exponent": exponent,
        "worst_bound_margin": checks[0].details["worst_margin"],
        "pass": {c.identity_name: c.passed for c in checks},
        "all_pass": all_pass,
        "records": [c.to_dict() for c in checks],
        "diagnostics": [c.to_dict() for c in diagnostics],
    }
    files = {
        "trajectory.csv": write_atomic(out / "trajectory.csv", trajectory_csv(traj)),
        "summary.json": write_atomic(out / "summary.json", dumps(summary)),
    }
    write_manifest(out, cfg.to_dict(), cfg.seed, files)
    for c in checks:
        print(c)
    print(f"fitted decay exponent: {'undefined' if exponent is None else f'{exponent:.6f}'}")
    print(f"trajectory: {out / 'trajectory.csv'}")
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def render_report(docs: list[dict]) -> str:
    """Markdown summary of verify reports and evolve summaries, in input order."""
    lines = ["# OU identity verification summary", ""]
    for i, doc in enumerate(docs, 1):
        kind = doc.get("kind")
        lines.append(f"## Input {i}: {kind} (seed {doc.get('seed')})")
        lines.append("")
        if kind == "evolve":
            cfg = doc.get("config", {})
            exp = doc.get("fitted_exponent")
            lines.append(f"- initial density: `{cfg.get('initial')}` in dimension {cfg.get('dimension')}")
            lines.append(f"- fitted decay exponent: {'undefined' if exp is None else repr(exp)}")
            lines.append(f"- worst decay-bound margin: {doc.get('worst_bound_margin')!r}")
            lines.append("")
        records = doc.get("records", [])
        groups: dict[str, list[dict]] = {}
        for r in records:
            groups.setdefault(r["identity_name"], []).append(r)
        lines.append("| check | result | checks | worst rel residual | tolerance | identity |")
        lines.append("|---|---|---|---|---|---|")
        for name in sorted(groups):
            rs = groups[name]
            ok = all(r["pass"] is True for r in rs)
            worst = max((r["max_rel_residual"] for r in rs), key=lambda v: float(v))
            lines.append(f"| {name} | {'pass' if ok else 'FAIL'} | {len(rs)} | {float(worst):.3e} | "
                         f"{float(rs[0]['tolerance']):.1e} | {CITATIONS.get(name, '').replace('|', chr(92) + '|')} |")
        lines.append("")
        lines.append(f"Overall: {'all checks pass' if doc.get('all_pass') else 'FAILURES present'}")
        lines.append("")
    return "\n".join(lines)


def run_report(args) -> int:
    if not args.files:
        print("report: no input files given", file=sys.stderr)
        return EXIT_CONFIG
    docs = []
    for f in args.files:
        path = Path(f)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            print(f"report: cannot read {f}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except json.JSONDecodeError as exc:
            print(f"report: {f} is not valid JSON (line {exc.lineno}, column {exc.colno})", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(doc, dict) or doc.get("kind") not in ("verify", "evolve"):
            print(f"report: {f} is not a verify report or evolve summary", file=sys.stderr)
            return EXIT_CONFIG
        docs.append(doc)
    text = render_report(docs)
    if args.out:
        out = Path(args.out)
        write_atomic(out / "summary.md", text)
        print(f"summary: {out / 'summary.md'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(d.get("all_pass") for d in docs) else EXIT_CHECK_FAILED


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--tolerance-scale", type=float, default=1.0,
                        help="multiply every tolerance by this factor")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ou-lab", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", parents=[common], help="run the identity suite")
    p.add_argument("config")
    p.set_defaults(func=run_verify)
    p = sub.add_parser("evolve", parents=[common], help="run an entropy/Fisher trajectory")
    p.add_argument("config")
    p.set_defaults(func=run_evolve)
    p = sub.add_parser("report", parents=[common], help="merge reports into a markdown summary")
    p.add_argument("files", nargs="*")
    p.set_defaults(func=run_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        print("--seed must be a non-negative integer", file=sys.stderr)
        return EXIT_CONFIG
    if not args.tolerance_scale > 0:
        print("--tolerance-scale must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, NodeBudgetError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if "OU_LAB_NODE_BUDGET" in str(exc):
            print(f"environment error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
