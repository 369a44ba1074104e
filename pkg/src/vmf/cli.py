"""Command line front-end: ``vmf solve|continue|analyze|hamiltonian --config PATH``.

Exit codes: 0 success, 1 configuration or input error, 2 non-convergence
(including a continuation truncated at a fold).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import blowup
from .config import ConfigError, Scenario, load_config
from .greens import GreensEvaluator, green_estimate_check
from .grid import FlatTorus, GridError, Rectangle, read_field_csv, write_field_csv
from .io import read_json, write_json, write_run_meta
from .kirchhoff import KirchhoffError, VortexConfig, find_critical, gradient, hamiltonian
from .measure import MeasureError
from .solver import ContinuationError, ProblemSpec, SolverError, continuation, solve_newton

log = logging.getLogger("vmf")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2


def _threads() -> int:
    raw = os.environ.get("VMF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"VMF_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"VMF_THREADS must be a positive integer, got {raw!r}")
    return n


def _problem_dict(spec: ProblemSpec) -> dict:
    d = spec.domain
    if isinstance(d, Rectangle):
        dom = {"kind": "rectangle", "width": d.width, "height": d.height}
    elif isinstance(d, FlatTorus):
        dom = {"kind": "torus", "period_x": d.period_x, "period_y": d.period_y}
    else:
        dom = {"kind": "disk"}
    return {
        "domain": dom,
        "n": spec.n,
        "node_count": spec.grid.node_count,
        "h": spec.grid.h,
        "variant": spec.variant,
        "stencil": spec.stencil,
        "lambda": spec.lam,
        "measure": {"kind": spec.measure.kind, "support": list(spec.measure.support),
                    "alphas": spec.measure.alphas.tolist(), "weights": spec.measure.weights.tolist()},
    }


def _centre_value(spec: ProblemSpec, v) -> dict:
    d = spec.domain
    if isinstance(d, Rectangle):
        c = (d.width / 2, d.height / 2)
    elif isinstance(d, FlatTorus):
        c = (d.period_x / 2, d.period_y / 2)
    else:
        c = (0.0, 0.0)
    k = spec.grid.nearest_node(c)
    return {"location": spec.grid.nodes[k].tolist(), "value": float(v[k])}


def _report(sc: Scenario, spec: ProblemSpec, v) -> dict:
    rep = blowup.analyze(
        spec, v,
        threshold=sc.peak_threshold,
        min_separation=sc.min_separation,
        ball_radius=sc.ball_radius,
        rv_radius=sc.rv_radius,
        pohozaev_radii=sc.pohozaev_radii,
    )
    return rep.to_dict()


# --- commands ----------------------------------------------------------------


def cmd_solve(sc: Scenario, out: Path, seed: int) -> int:
    spec = sc.problem(sc.require_lambda())
    g = spec.grid
    v0 = sc.seed_policy("zero").initial(g, None)
    try:
        res = solve_newton(spec, v0, sc.tol, sc.max_newton)
        summary = res.summary()
        v = res.v
    except (SolverError, OverflowError) as exc:
        summary = {"converged": False, "reason": str(exc)}
        v = None
    result = {"problem": _problem_dict(spec), **summary}
    if v is not None:
        write_field_csv(out / "solution.csv", g, v)
        result["centre"] = _centre_value(spec, v)
        result["residual_history"] = res.residual_history
    write_json(out / "result.json", result)
    write_json(out / "run_log.json", [summary])
    if not summary["converged"]:
        log.error("solve did not converge: %s", summary.get("reason", ""))
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_continue(sc: Scenario, out: Path, seed: int) -> int:
    lambdas = sc.require_lambda_list()
    base = sc.problem(lambdas[0])
    try:
        trace = continuation(base, lambdas, sc.seed_policy("previous"), sc.tol, sc.max_newton)
    except ContinuationError as exc:
        log.error("%s", exc)
        write_json(out / "trace.json", {"problem": _problem_dict(base), "requested": lambdas,
                                        "points": [], "complete": False, "stop_reason": str(exc)})
        return EXIT_NONCONVERGED
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    points = []
    for k, (pt, res) in enumerate(zip(trace.points, trace.solutions)):
        name = f"snapshots/v_{k:03d}.csv"
        write_field_csv(out / name, base.grid, res.v)
        points.append({**pt.as_dict(), "denominator": res.denominator, "snapshot": name})
    doc = {
        "problem": _problem_dict(base),
        "requested": lambdas,
        "points": points,
        "complete": trace.complete,
        "fold_candidate": None if trace.fold_candidate is None else list(trace.fold_candidate),
        "stop_reason": trace.stop_reason,
    }
    write_json(out / "trace.json", doc)
    write_json(out / "run_log.json", [r.summary() for r in trace.solutions])
    if sc.analyze:
        specs = [base.with_lambda(p.lam) for p in trace.points]
        _write_reports(sc, out, specs, [r.v for r in trace.solutions])
    if not trace.complete:
        log.warning("continuation stopped between lambda = %s and %s: %s",
                    *trace.fold_candidate, trace.stop_reason)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _write_reports(sc: Scenario, out: Path, specs, fields) -> None:
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(lambda sv: _report(sc, *sv), zip(specs, fields)))
    if len(reports) == 1:
        write_json(out / "blowup_report.json", reports[0])
        return
    for k, rep in enumerate(reports):
        write_json(out / f"blowup_report_{k:03d}.json", rep)
    write_json(out / "blowup_trace.json", reports)


def cmd_analyze(sc: Scenario, out: Path, seed: int) -> int:
    if sc.input is None:
        raise ConfigError("missing required key", "input")
    src = sc.resolve(sc.input)
    if not src.exists():
        raise sc.error("input", f"input file {src} does not exist")
    if src.suffix == ".json":
        doc = read_json(src)
        if "points" not in doc:
            raise sc.error("input", f"{src} is not a continuation trace")
        base = sc.problem(float(doc["points"][0]["lambda"]) if doc["points"] else 0.0)
        specs, fields = [], []
        for p in doc["points"]:
            spec = base.with_lambda(float(p["lambda"]))
            _, vals = read_field_csv(src.parent / p["snapshot"], spec.grid)
            specs.append(spec)
            fields.append(vals)
        if not specs:
            write_json(out / "blowup_trace.json", [])
    else:
        spec = sc.problem(sc.require_lambda())
        _, vals = read_field_csv(src, spec.grid)
        specs, fields = [spec], [vals]
    if specs:
        _write_reports(sc, out, specs, fields)
    if sc.estimate_deltas:
        checks = []
        for d in sc.estimate_deltas:
            r = green_estimate_check(d, sc.estimate_samples, seed)
            checks.append({"delta": d, "samples": sc.estimate_samples, "seed": seed,
                           "violations": len(r.violations), "ok": r.ok})
        write_json(out / "estimate_check.json", checks)
    return EXIT_OK


def cmd_hamiltonian(sc: Scenario, out: Path, seed: int) -> int:
    if sc.vortex is None:
        raise ConfigError("missing required key", "vortex")
    if isinstance(sc.domain, Rectangle):
        raise sc.error("domain", "the Hamiltonian needs a disk or torus domain (closed-form Green's function)")
    greens = GreensEvaluator(sc.domain)
    pts = np.array([(x, y) for x, y, _ in sc.vortex])
    rs = np.array([r for _, _, r in sc.vortex])
    try:
        cfg = VortexConfig(pts, rs)
        h0 = hamiltonian(cfg, greens)
        g0 = gradient(cfg, greens)
    except KirchhoffError as exc:
        raise sc.error("vortex", str(exc)) from None
    doc = {
        "initial": {"points": pts.tolist(), "hamiltonian": h0, "gradient_norm": float(np.linalg.norm(g0))},
        "intensities": rs.tolist(),
    }
    code = EXIT_OK
    if sc.critical:
        cfg1, rep = find_critical(cfg, greens, sc.critical_tol, sc.max_iter)
        doc.update({
            "points": cfg1.points.tolist(),
            "hamiltonian": hamiltonian(cfg1, greens),
            "gradient_norm": rep.gradient_norm,
            "gradients": rep.gradients.tolist(),
            "converged": rep.converged,
            "degenerate": rep.degenerate,
            "iterations": rep.iterations,
            "message": rep.message,
        })
        if not rep.converged:
            code = EXIT_NONCONVERGED
    else:
        doc.update({"points": pts.tolist(), "hamiltonian": h0, "gradient_norm": float(np.linalg.norm(g0)),
                    "gradients": g0.tolist()})
    write_json(out / "critical.json", doc)
    return code


COMMANDS = {"solve": cmd_solve, "continue": cmd_continue, "analyze": cmd_analyze, "hamiltonian": cmd_hamiltonian}


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vmf", description="Mean-field vortex equation solver and blow-up diagnostics.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="scenario file (key = value lines)")
    p.add_argument("--out", type=Path, help="output directory (default: the config's 'out' key)")
    p.add_argument("--seed", type=_u64, help="seed for randomized checks (overrides rng_seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="vmf: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        sc = load_config(args.config)
        seed = args.seed if args.seed is not None else sc.rng_seed
        out = args.out if args.out is not None else sc.resolve(sc.out)
        out.mkdir(parents=True, exist_ok=True)
        threads = _threads()
        write_run_meta(out, args.command, args.config, seed, threads)
        return COMMANDS[args.command](sc, out, seed)
    except (ConfigError, GridError, MeasureError, KirchhoffError, blowup.BlowupError) as exc:
        print(f"vmf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"vmf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
