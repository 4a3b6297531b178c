"""Command-line front end.

    rankcurve witness --system cubic.sys --anchor 0,-1 --seed 7
    rankcurve empty   --system quartic.sys
    rankcurve refine  --system cubic.sys --anchor 0,-1 --target-beta 1e8
    rankcurve trace   --system cubic.sys --points 100 --format csv --out run/

Exit status: 0 on success, 2 when the emptiness test reports Empty, 1 on
errors.  ``report.json`` is deterministic for a given argv; wall-clock
timings go to a separate ``timings.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, PolyParseError, RankCurveError
from .penalty import PenaltyProblem
from .poly import PolySystem, load_system_text
from .refine import refine_witness
from .tracer import TracedBranch, TraceConfig, draw_anchor, trace_all
from .witness import (
    VerdictKind,
    default_radius,
    degree_index_estimate,
    emptiness_test,
    filter_witnesses,
    multistart_critical_points,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2
REPORT_VERSION = 1


@dataclass
class RunReport:
    command: str
    system: str
    config_echo: dict
    verdict: dict | None = None
    anchor: list | None = None
    witness_summary: list = field(default_factory=list)
    refined: list = field(default_factory=list)
    branches: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "version": REPORT_VERSION,
            "command": self.command,
            "system": self.system,
            "config_echo": self.config_echo,
            "verdict": self.verdict,
            "anchor": self.anchor,
            "witness_summary": self.witness_summary,
            "refined": self.refined,
            "branches": self.branches,
        }
        return _finite(doc)


def _finite(obj):
    """Replace non-finite floats by None so the document is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def predicted_exponent(index: int) -> float | None:
    return 1.0 / (2 * index - 1) if index >= 1 else None


def witness_entry(sys_: PolySystem, cp, seed: int) -> dict:
    # the witness is only near the curve: restriction coefficients of order
    # sqrt(residual) are treated as vanished, and the most frequent degree
    # over directions is reported
    tol = min(max(10.0 * math.sqrt(cp.residual), 1e-10), 0.5)
    index = degree_index_estimate(sys_, cp.x, trials=16, seed=seed, tol=tol, reduce="mode")
    entry = cp.as_dict()
    entry["degree_index"] = index
    entry["predicted_exponent"] = predicted_exponent(index)
    return entry


def branch_entry(i: int, branch: TracedBranch) -> dict:
    return {
        "index": i,
        "origin_witness": branch.origin_witness.as_dict() if branch.origin_witness else None,
        "termination": branch.termination.value,
        "reverse_termination": branch.reverse_termination.value if branch.reverse_termination else None,
        "n_points": len(branch),
        "retube_count": branch.retube_count,
        "curve_points": [[float(v) for v in p] for p in branch.curve_points],
        "companion_points": [[float(v) for v in p] for p in branch.companion_points],
        "residuals": [st.residual for st in branch.steps],
        "eigenvalue_c": [st.eigenvalue_c for st in branch.steps],
        "min_eigenvalue": [st.min_eigenvalue for st in branch.steps],
    }


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_branch(branch: TracedBranch, fmt: str, path, sys_: PolySystem | None = None,
                 n_vars: int | None = None) -> list[Path]:
    """Write one branch.  ``csv``: ``path`` plus a sibling ``companion_*``
    file; ``json``: a single document.  Returns the written paths."""
    path = Path(path)
    if n_vars is None:
        n_vars = sys_.n_vars if sys_ is not None else (len(branch.curve_points[0]) if branch.curve_points else 0)
    if fmt == "json":
        path.write_text(json.dumps(_finite(branch_entry(0, branch)), indent=1) + "\n")
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    coords = [f"x{i + 1}" for i in range(n_vars)]
    residuals = [st.residual for st in branch.steps]
    if len(residuals) != len(branch.curve_points):
        residuals = [float(np.linalg.norm(sys_.evaluate(p))) if sys_ is not None else math.nan
                     for p in branch.curve_points]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["idx", *coords, "residual"])
        for i, (p, r) in enumerate(zip(branch.curve_points, residuals)):
            w.writerow([i, *map(_fmt, p), _fmt(r)])
    name = path.name
    comp = path.with_name("companion_" + (name[len("branch_"):] if name.startswith("branch_") else name))
    with open(comp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["idx", *coords])
        for i, p in enumerate(branch.companion_points):
            w.writerow([i, *map(_fmt, p)])
    return [path, comp]


def read_branch_csv(path) -> np.ndarray:
    """Rows of a branch CSV as floats (idx column dropped)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) <= 1:
        return np.zeros((0, max(len(rows[0]) - 1, 0) if rows else 0))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def emit_plot_script(report: RunReport, path, n_vars: int) -> Path | None:
    """Gnuplot script drawing each branch (gold) and its companion (blue).
    Two variables give a plane plot, more a projection onto x1, x2, x3."""
    if not report.branches:
        return None
    path = Path(path)
    lines = [
        "# gnuplot script: traced curve and companion curve",
        "set datafile separator ','",
        "set key outside",
        "set grid",
    ]
    if n_vars == 2:
        lines += ["set xlabel 'x1'", "set ylabel 'x2'", "set size ratio -1"]
        cols, cmd = "2:3", "plot"
    else:
        lines += ["set xlabel 'x1'", "set ylabel 'x2'", "set zlabel 'x3'", "set view equal xyz"]
        cols, cmd = "2:3:4", "splot"
    parts = []
    for b in report.branches:
        i = b["index"]
        parts.append(f"'branch_{i}.csv' skip 1 using {cols} with linespoints pt 7 ps 0.4 lc rgb 'goldenrod' title 'curve {i}'")
        parts.append(f"'companion_{i}.csv' skip 1 using {cols} with linespoints pt 6 ps 0.4 lc rgb 'blue' title 'companion {i}'")
    lines.append(cmd + " " + ", \\\n     ".join(parts))
    lines.append("pause mouse close")
    path.write_text("\n".join(lines) + "\n")
    return path


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, help="system file (first line 'vars: ...')")
    common.add_argument("--beta", type=float, default=1e4, help="penalty weight")
    common.add_argument("--lambda", dest="lam", type=float, default=0.1, help="contraction factor in (0,1)")
    common.add_argument("--step", type=float, default=0.01, help="tracing step h")
    common.add_argument("--points", type=int, default=200, help="points per traced direction")
    common.add_argument("--eps", type=float, default=1e-3, help="witness residual threshold")
    common.add_argument("--starts", type=int, default=500, help="multistart count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--anchor", type=_floats, default=None,
                        help="fixed anchor a1,a2,... (for 'empty': n+1 values, homogenizing coordinate last)")
    common.add_argument("--radius", type=float, default=None, help="multistart ball radius")
    common.add_argument("--format", choices=["csv", "json"], default="json")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--emit-plot", action="store_true", help="write plot.gp (gnuplot)")
    common.add_argument("--both-directions", action=argparse.BooleanOptionalAction, default=True)
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="rankcurve", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("witness", parents=[common], help="critical points and witnesses")
    sub.add_parser("empty", parents=[common], help="sufficient test for an empty real variety")
    p = sub.add_parser("refine", parents=[common], help="beta-continuation of witnesses")
    p.add_argument("--target-beta", type=float, default=1e8)
    p = sub.add_parser("trace", parents=[common], help="full tracing pipeline")
    p.add_argument("--trace-beta", type=float, default=None,
                   help="refine witnesses to this beta and trace there")
    return parser


def _config(args) -> TraceConfig:
    return TraceConfig(
        beta=args.beta, lam=args.lam, step=args.step, n_points=args.points,
        eps_residual=args.eps, seed=args.seed, n_starts=args.starts,
        both_directions=args.both_directions,
        anchor=args.anchor if args.command != "empty" else None,
        search_radius=args.radius,
        trace_beta=getattr(args, "trace_beta", None),
    )


def _echo(args, cfg: TraceConfig) -> dict:
    echo = cfg.as_dict()
    if args.command == "empty":
        echo["empty_anchor"] = list(args.anchor) if args.anchor else None
    if args.command == "refine":
        echo["target_beta"] = args.target_beta
    return echo


def _witnesses(sys_, cfg, report):
    anchor = draw_anchor(sys_, cfg)
    prob = PenaltyProblem(sys_, anchor, cfg.beta)
    radius = cfg.search_radius if cfg.search_radius is not None else default_radius(anchor)
    t0 = time.perf_counter()
    pts = multistart_critical_points(prob, cfg.n_starts, radius, cfg.seed)
    report.timings["witness_ms"] = 1e3 * (time.perf_counter() - t0)
    report.anchor = [float(v) for v in anchor]
    return anchor, pts, filter_witnesses(pts, cfg.eps_residual)


def _run(args, out):
    """Returns ``(exit code, report, system, traced branches)``."""
    cfg = _config(args)
    path = Path(args.system)
    sys_ = load_system_text(path.read_text())
    report = RunReport(args.command, path.name, _echo(args, cfg))
    code = EXIT_OK
    branches: list[TracedBranch] = []

    if args.command == "witness":
        _, pts, wits = _witnesses(sys_, cfg, report)
        report.witness_summary = [witness_entry(sys_, cp, cfg.seed) for cp in wits]
        out(f"{len(pts)} critical points, {len(wits)} with residual < {cfg.eps_residual:g}")
        for w in report.witness_summary:
            out("  x=[" + ", ".join(f"{v:.6f}" for v in w["x"]) + f"]  residual={w['residual']:.3e}"
                f"  mu={w['mu']:.6g}  index={w['degree_index']}")

    elif args.command == "empty":
        t0 = time.perf_counter()
        verdict = emptiness_test(sys_, cfg.beta, cfg.n_starts, cfg.seed,
                                 anchor=args.anchor, radius=args.radius or 2.0)
        report.timings["emptiness_ms"] = 1e3 * (time.perf_counter() - t0)
        report.verdict = verdict.as_dict()
        out(f"verdict {verdict.kind.value}: mu_bar_min = {verdict.mu_bar_min:.6g} (threshold {verdict.threshold:g})")
        if verdict.is_empty:
            code = EXIT_EMPTY

    elif args.command == "refine":
        if not args.target_beta > 0:
            raise ConfigError("target-beta must be positive")
        anchor, _, wits = _witnesses(sys_, cfg, report)
        report.witness_summary = [witness_entry(sys_, cp, cfg.seed) for cp in wits]
        t0 = time.perf_counter()
        for cp in wits:
            try:
                r = refine_witness(sys_, anchor, cp.x, cfg.beta, args.target_beta)
                entry = r.as_dict()
                entry["moved"] = float(np.linalg.norm(r.x - cp.x))
                entry["status"] = "ok"
            except RankCurveError as exc:
                entry = {"x": [float(v) for v in cp.x], "status": f"failed: {exc}"}
            report.refined.append(entry)
            out(f"  {entry['status']}: x=[" + ", ".join(f"{v:.8f}" for v in entry["x"]) + "]"
                + (f" residual={entry['residual']:.3e}" if "residual" in entry else ""))
        report.timings["refine_ms"] = 1e3 * (time.perf_counter() - t0)

    else:  # trace
        result = trace_all(sys_, cfg, empty_anchor=None)
        report.timings.update(result.timings)
        report.verdict = result.verdict.as_dict()
        report.anchor = [float(v) for v in result.anchor]
        report.witness_summary = [witness_entry(sys_, cp, cfg.seed) for cp in result.witnesses]
        report.branches = [branch_entry(i, b) for i, b in enumerate(result.branches)]
        if result.verdict.kind is VerdictKind.EMPTY:
            out(f"verdict Empty: mu_bar_min = {result.verdict.mu_bar_min:.6g}")
            code = EXIT_EMPTY
        else:
            out(f"{len(result.witnesses)} witnesses, {len(result.branches)} branches")
            for b in report.branches:
                out(f"  branch {b['index']}: {b['n_points']} points, {b['termination']}")
        branches = result.branches
    return code, report, sys_, branches


def _write_outputs(args, report: RunReport, sys_: PolySystem, branches, out) -> None:
    if args.out is None:
        return
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv" or args.emit_plot:
        for i, b in enumerate(branches):
            write_branch(b, "csv", outdir / f"branch_{i}.csv", sys_)
    doc = report.to_json()
    (outdir / "report.json").write_text(json.dumps(doc, indent=1) + "\n")
    (outdir / "timings.json").write_text(json.dumps(report.timings, indent=1, sort_keys=True) + "\n")
    if args.emit_plot:
        if emit_plot_script(report, outdir / "plot.gp", sys_.n_vars) is None:
            out("no branches: plot script skipped")


def run_command(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR

    def out(msg):
        if not args.quiet:
            print(msg, file=stdout)

    try:
        code, report, sys_, branches = _run(args, out)
        _write_outputs(args, report, sys_, branches, out)
        if args.out is None and not args.quiet:
            print(json.dumps(report.to_json(), indent=1), file=stdout)
    except FileNotFoundError as exc:
        print(f"rankcurve: error: file not found: {exc.filename}", file=stderr)
        return EXIT_ERROR
    except PolyParseError as exc:
        print(f"rankcurve: error: {args.system}: {exc}", file=stderr)
        return EXIT_ERROR
    except (ConfigError, RankCurveError, ValueError, OSError) as exc:
        print(f"rankcurve: error: {exc}", file=stderr)
        return EXIT_ERROR
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
