"""Command-line front end: one config file in, CSV/JSON/binary artifacts out.

Exit codes: 0 success, 2 config error, 3 solver termination, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .diagnostics import DiagnosticsRecord, compute_record
from .exponents import (
    X43, ExpPair, GainKind, PotentialClass, classify_potential, is_admissible, is_dual_admissible,
    is_grad_admissible, is_qr_admissible, magnetic_theta, theta_gain,
)
from .grid import save_field, save_slice_csv
from .magnetic import PotentialSpec, smooth_potential
from .propagate import decay_rate_check
from .solver import SolverTermination, Termination, Trajectory, critical_smallness, solve_global, stability_experiment
from .viscosity import limit_report, run_family

log = logging.getLogger("magnls")

OUTPUT_ROOT_ENV = "MAGNLS_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4
SUMMARY_SCHEMA = "summary-v1"
FAILURE_SCHEMA = "failure-v1"

DEFAULT_DECAY_CASES = (("1", "inf", 0.0, False), ("1", "inf", 0.1, False), ("1", "4", 0.1, False),
                       ("2", "2", 0.1, True), ("2", "2", 0.0, False))


class InvariantViolation(RuntimeError):
    pass


# --- writers -------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: Path, header, rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def load_schema(name: str) -> dict:
    text = resources.files("magnls").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def write_json(path: Path, doc: dict, schema: str | None = None) -> Path:
    doc = _clean(doc)
    if schema is not None:
        jsonschema.validate(doc, load_schema(schema))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    return path


def output_dir(cfg: RunConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(cfg.output)
    if root:
        out = Path(root) / (out.name if out.is_absolute() else out)
    return out


def _summary(cfg: RunConfig, experiment: str, status: str, exit_code: int, results: dict) -> dict:
    return {
        "schema_version": SUMMARY_SCHEMA,
        "magnls_version": __version__,
        "experiment": experiment,
        "status": status,
        "exit_code": exit_code,
        "seed": cfg.seed,
        "config": cfg.effective,
        "results": results,
    }


def _failure(out: Path, experiment: str, exit_code: int, reason: str, message: str, **extra) -> None:
    doc = {"schema_version": FAILURE_SCHEMA, "experiment": experiment, "exit_code": exit_code,
           "reason": reason, "message": message}
    doc.update(extra)
    write_json(out / "failure.json", doc, FAILURE_SCHEMA)


# --- run -----------------------------------------------------------------------------

def _snapshot_indices(n: int, count: int) -> list:
    if count <= 0:
        return []
    return sorted({int(round(x)) for x in np.linspace(0, n - 1, min(count, n))})


def _picard_summary(traj: Trajectory) -> dict:
    slabs = traj.slabs
    ratios = [s.contraction_ratio for s in slabs if math.isfinite(s.contraction_ratio)]
    return {
        "slabs": len(slabs),
        "iterations_total": int(sum(s.iterations for s in slabs)),
        "iterations_max": int(max((s.iterations for s in slabs), default=0)),
        "contraction_ratio_max": max(ratios) if ratios else None,
        "contraction_ratio_mean": float(np.mean(ratios)) if ratios else None,
        "halvings_max": int(max((s.depth for s in slabs), default=0)),
        "residual_max": max((s.residual for s in slabs), default=None),
    }


def write_run_artifacts(out: Path, cfg: RunConfig, config, datum, traj: Trajectory, A: PotentialSpec,
                        experiment: str = "run") -> tuple:
    """Trajectory snapshots, diagnostics, Picard stats and summary for one solve; returns (record, results)."""
    grid = cfg.grid
    rec: DiagnosticsRecord = compute_record(traj, A, config)
    fields = out / "fields"
    fields.mkdir(parents=True, exist_ok=True)
    snaps = []
    for k in _snapshot_indices(len(traj), cfg.experiment.snapshots):
        t = float(traj.times[k])
        name = f"u_{k:05d}"
        save_field(fields / f"{name}.bin", grid, traj.states[k], {"time": t, "index": k})
        save_slice_csv(fields / f"{name}.csv", grid, traj.states[k])
        snaps.append({"index": k, "time": t, "file": f"fields/{name}.bin"})
    for j, comp in enumerate(A.sample_components(grid, 0.0)):
        for ax in range(grid.dim):
            save_field(fields / f"A_{j}_{'xyz'[ax]}.bin", grid, comp[ax].astype(complex),
                       {"component": j, "axis": ax, "time": 0.0})
    write_csv(out / "diagnostics.csv", DiagnosticsRecord.COLUMNS, rec.rows())
    write_csv(out / "picard_stats.csv", ("t0", "t1", "substeps", "iterations", "contraction_ratio", "residual",
                                         "halvings"),
              ([s.t0, s.t1, s.substeps, s.iterations, s.contraction_ratio, s.residual, s.depth] for s in traj.slabs))
    results = {
        "termination": traj.termination.value,
        "t_hit": traj.t_hit,
        "message": traj.message,
        "samples": len(traj),
        "final_time": float(traj.times[-1]),
        "snapshots": snaps,
        "diagnostics": rec.summary(),
        "picard": _picard_summary(traj) if config.scheme == "picard" else None,
    }
    if config.nonlinearity.gamma == 5:
        chk = critical_smallness(grid, datum, float(traj.times[-1]) or cfg.experiment.T, config)
        results["critical_smallness"] = {"value": chk.value, "eta0": chk.eta0, "small": chk.small}
    return rec, results


def _status(traj_terms, violations) -> tuple:
    if any(t is not Termination.COMPLETED for t in traj_terms):
        return "solver-termination", EXIT_SOLVER
    if violations:
        return "invariant-violation", EXIT_INVARIANT
    return "ok", EXIT_OK


def cmd_run(cfg: RunConfig, out: Path) -> int:
    datum = cfg.datum.build(cfg.grid, cfg.seed)
    traj = solve_global(cfg.grid, datum, cfg.experiment.T, cfg.potential, cfg.solver)
    rec, results = write_run_artifacts(out, cfg, cfg.solver, datum, traj, cfg.potential)
    status, code = _status([traj.termination], rec.violations)
    write_json(out / "summary.json", _summary(cfg, "run", status, code, results), SUMMARY_SCHEMA)
    if code == EXIT_SOLVER:
        _failure(out, "run", code, traj.termination.value, traj.message, t_hit=traj.t_hit)
    elif code == EXIT_INVARIANT:
        _failure(out, "run", code, "invariant-violation", "; ".join(rec.violations), violations=rec.violations)
    return code


# --- sweep-eps -----------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    grid, A = cfg.grid, cfg.potential
    datum = cfg.datum.build(grid, cfg.seed)
    eps = list(cfg.experiment.epsilons)
    family = run_family(grid, datum, A, cfg.experiment.T, eps, cfg.solver, workers=min(len(eps), os.cpu_count() or 1))
    violations, members = [], []

    def member(k):
        e, traj = eps[k], family.trajectories[k]
        config = replace(cfg.solver, epsilon=e)
        return write_run_artifacts(out / "members" / f"eps_{k}", cfg, config, datum, traj, A, "sweep-eps")

    with ThreadPoolExecutor(max_workers=min(len(eps), os.cpu_count() or 1)) as pool:
        outputs = list(pool.map(member, range(len(eps))))
    for k, (rec, res) in enumerate(outputs):
        violations += [f"eps={eps[k]:g}: {v}" for v in rec.violations]
        members.append({"epsilon": eps[k], "directory": f"members/eps_{k}", **res})

    write_csv(out / "cauchy_table.csv", ["epsilon"] + [f"{e:.17g}" for e in eps],
              ([e] + list(row) for e, row in zip(eps, family.cauchy_table)))
    rows = []
    for e, traj, res in zip(eps, family.trajectories, family.residual_series):
        rows += [[e, t, r] for t, r in zip(traj.times[1:-1], res)]
    write_csv(out / "residuals.csv", ("epsilon", "time", "weak_residual"), rows)
    report = limit_report(family) if len(eps) >= 3 else None
    if report is not None:
        write_csv(out / "limit_bounds.csv", ("epsilon", "sup_mass", "sup_energy", "sup_h1"),
                  ([b["epsilon"], b["sup_mass"], b["sup_energy"], b["sup_h1"]] for b in report["uniform_bounds"]))
        write_json(out / "limit_report.json", report)
        if report["uniform_bounds"] and max(b["sup_mass"] for b in report["uniform_bounds"]) > \
                report["datum_mass"] * (1 + 1e-8):
            violations.append("family mass exceeds datum mass")
    status, code = _status(family.terminations, violations)
    results = {"epsilons": eps, "members": members, "cauchy_table": family.cauchy_table.tolist(),
               "tail_differences": family.tail_differences(), "limit_report": report, "violations": violations}
    write_json(out / "summary.json", _summary(cfg, "sweep-eps", status, code, results), SUMMARY_SCHEMA)
    if code == EXIT_SOLVER:
        bad = [m for m in members if m["termination"] != Termination.COMPLETED.value]
        _failure(out, "sweep-eps", code, bad[0]["termination"], bad[0]["message"],
                 epsilons=[m["epsilon"] for m in bad])
    elif code == EXIT_INVARIANT:
        _failure(out, "sweep-eps", code, "invariant-violation", "; ".join(violations), violations=violations)
    return code


# --- stability -----------------------------------------------------------------------

def cmd_stability(cfg: RunConfig, out: Path) -> int:
    grid, A = cfg.grid, cfg.potential
    f1 = cfg.datum.build(grid, cfg.seed)
    f2 = f1 * (1 + cfg.experiment.bump)
    B = cfg.experiment.perturbation or smooth_potential(amplitude=1.0, width=cfg.datum.width)
    try:
        table = stability_experiment(grid, f1, f2, A, B, cfg.experiment.deltas, cfg.experiment.T, cfg.solver)
    except SolverTermination as exc:
        _failure(out, "stability", EXIT_SOLVER, "solver-termination", str(exc))
        return EXIT_SOLVER
    write_csv(out / "stability.csv", ("delta", "perturbation_norm", "datum_distance", "linf_h1", "l4_w13", "ratio"),
              ([r.delta, r.perturbation_norm, r.datum_distance, r.linf_h1, r.l4_w13, r.ratio] for r in table.rows))
    results = {"observed_order": table.observed_order(),
               "max_ratio": max((r.ratio for r in table.rows), default=0.0),
               "rows": [{"delta": r.delta, "linf_h1": r.linf_h1, "l4_w13": r.l4_w13, "ratio": r.ratio}
                        for r in table.rows]}
    write_json(out / "summary.json", _summary(cfg, "stability", "ok", EXIT_OK, results), SUMMARY_SCHEMA)
    return EXIT_OK


# --- check-pairs and classify-potential ----------------------------------------------

def pair_verdicts(sp: ExpPair, target: ExpPair = X43) -> dict:
    row = {"q": str(sp.q), "r": str(sp.r), "admissible": is_admissible(sp).value,
           "dual_admissible": is_dual_admissible(sp)}
    for kind, pred in ((GainKind.INHOM, is_qr_admissible), (GainKind.GRAD, is_grad_admissible)):
        ok = pred(sp, target)
        row[f"{kind.value}_admissible"] = ok
        row[f"theta_{kind.value}"] = str(theta_gain(sp, kind, target)) if ok else ""
    return row


PAIR_COLUMNS = ("q", "r", "admissible", "dual_admissible", "inhom_admissible", "theta_inhom",
                "grad_admissible", "theta_grad")


def parse_pair_tokens(tokens) -> list:
    toks = []
    for t in tokens:
        toks += [x for x in t.replace(",", " ").split() if x]
    if len(toks) % 2:
        raise ConfigError(f"pairs need an even number of exponent tokens, got {len(toks)}")
    try:
        return [ExpPair.of(q, r) for q, r in zip(toks[::2], toks[1::2])]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid exponent literal: {exc}") from None


def format_table(rows, columns) -> str:
    cells = [list(columns)] + [[_show(r[c]) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells)


def _show(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v) if v != "" else "-"


def cmd_check_pairs(cfg: RunConfig | None, out: Path | None, tokens) -> int:
    pairs = parse_pair_tokens(tokens)
    if cfg is not None:
        pairs += parse_pair_tokens([" ".join(p) for p in cfg.experiment.pairs])
    if not pairs:
        raise ConfigError("no pairs given")
    rows = [pair_verdicts(p) for p in pairs]
    print(format_table(rows, PAIR_COLUMNS))
    if cfg is not None:
        write_csv(out / "pairs.csv", PAIR_COLUMNS, ([r[c] for c in PAIR_COLUMNS] for r in rows))
        write_json(out / "summary.json", _summary(cfg, "check-pairs", "ok", EXIT_OK, {"pairs": rows}), SUMMARY_SCHEMA)
    return EXIT_OK


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    spec = cfg.class_spec
    verdict = classify_potential(spec)
    try:
        theta = str(magnetic_theta(spec))
    except ValueError:
        theta = None
    members = sorted(c.name for c in verdict.memberships)
    lines = [f"verdict: {verdict.verdict.value}"]
    for cls in PotentialClass:
        if cls is PotentialClass.NONE:
            continue
        state = "member" if cls in verdict else f"violates {verdict.violations.get(cls)}"
        lines.append(f"  {cls.name:<9} {state}")
    lines.append(f"magnetic theta: {theta if theta is not None else '-'}")
    print("\n".join(lines))
    results = {"verdict": verdict.verdict.name, "memberships": members,
               "violations": {k.name: v for k, v in sorted(verdict.violations.items(), key=lambda kv: kv[0].name)},
               "magnetic_theta": theta,
               "components": cfg.effective["potential"]["class"]["components"]}
    write_json(out / "summary.json", _summary(cfg, "classify-potential", "ok", EXIT_OK, results), SUMMARY_SCHEMA)
    return EXIT_OK


# --- report --------------------------------------------------------------------------

def cmd_report(cfg: RunConfig, out: Path) -> int:
    cases = cfg.experiment.decay or DEFAULT_DECAY_CASES
    with ThreadPoolExecutor(max_workers=min(len(cases), os.cpu_count() or 1)) as pool:
        fits = list(pool.map(lambda c: decay_rate_check(c[0], c[1], c[2], gradient=c[3]), cases))
    header = ("p", "r", "eps", "gradient", "fitted_slope", "predicted_slope", "valid")
    rows = [[c[0], c[1], c[2], c[3], f.slope, f.predicted, f.valid] for c, f in zip(cases, fits)]
    write_csv(out / "decay_fits.csv", header, rows)
    results = {"fits": [{"p": c[0], "r": c[1], "eps": c[2], "gradient": c[3], "fitted_slope": f.slope,
                         "predicted_slope": f.predicted, "valid": f.valid, "message": f.message}
                        for c, f in zip(cases, fits)]}
    write_json(out / "summary.json", _summary(cfg, "report", "ok", EXIT_OK, results), SUMMARY_SCHEMA)
    return EXIT_OK


# --- entry point ---------------------------------------------------------------------

COMMANDS = {"run": cmd_run, "sweep-eps": cmd_sweep, "stability": cmd_stability,
            "classify-potential": cmd_classify, "report": cmd_report}


def dispatch(cfg: RunConfig, command: str | None = None) -> int:
    """Run the selected experiment and write its artifacts; returns the exit status."""
    command = command or cfg.experiment.kind
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "effective_config.json", cfg.effective)
    if command == "check-pairs":
        return cmd_check_pairs(cfg, out, [])
    return COMMANDS[command](cfg, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magnls", description="Viscous magnetic NLS experiments.")
    p.add_argument("--version", action="version", version=f"magnls {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the effective-config echo")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep-eps", "stability", "classify-potential", "report"):
        sub.add_parser(name).add_argument("config", help="TOML config file")
    cp = sub.add_parser("check-pairs", help="verdict table for exponent pairs, e.g. `4 3 inf 2 6 18/7`")
    cp.add_argument("pairs", nargs="*", help="exponent tokens, read two at a time as (q, r)")
    cp.add_argument("--config", help="optional config whose experiment.pairs are appended")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check-pairs":
            cfg = load_config(args.config) if args.config else None
            out = None
            if cfg is not None:
                out = output_dir(cfg)
                out.mkdir(parents=True, exist_ok=True)
                write_json(out / "effective_config.json", cfg.effective)
            return cmd_check_pairs(cfg, out, args.pairs)
        cfg = load_config(args.config)
        if not args.quiet:
            print(json.dumps(_clean(cfg.effective), sort_keys=True, ensure_ascii=False), file=sys.stderr)
        return dispatch(cfg, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
