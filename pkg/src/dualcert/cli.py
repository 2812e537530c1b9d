"""Command line: ``dualcert generate | solve | bench | report``.

Exit codes: 0 ok, 2 invalid input or configuration, 3 solver failure.
Output files go to ``--out-dir``, else ``$DUALCERT_OUTPUT_DIR``, else the
current directory.  ``--config FILE`` reads ``key = value`` lines (``#``
comments) keyed by long option names; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .apps import (build_mc_dual, build_multiclass, build_psd_completion, build_svm, gen_mc, gen_multiclass, gen_psd,
                   gen_svm, load_instance, multiclass_from_csv, save_instance, svm_from_csv)
from .apps.mc import McInstance
from .apps.multiclass import MulticlassInstance
from .apps.psd import PsdCompletionInstance
from .apps.svm import SvmInstance
from .core import GapTrace, RunRecord, fmt17
from .duality import DualField, dual_eval, estimate_Lf
from .solvers import SOLVERS, SolverConfig, scg_run

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
ENV_OUTPUT_DIR = "DUALCERT_OUTPUT_DIR"
SOLVER_NAMES = ("md", "mdl", "nerml", "scg")
DEFAULT_R = 10.0  # no natural default exists for svm/multiclass; see README
CHECKPOINTS = (32, 128)
BENCH_HEADER = ("instance", "solver", "m", "steps", "status", "gap1", "gap32", "gap128", "gap_budget",
                "gap1/gap32", "gap1/gap128", "gap1/gap_budget", "wall_time_sec", "error")
REPORT_NOTE = ("# Budgets are equal step counts, not equal wall time: the ratios measure progress per oracle call "
               "and do not depend on the hardware.")


class CliError(Exception):
    """Invalid input; maps to exit code 2."""


def output_dir(flag: str | None) -> Path:
    d = Path(flag or os.environ.get(ENV_OUTPUT_DIR) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def read_config(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.Namespace:
    """Fill options left unset on the command line from ``args.config``."""
    if getattr(args, "config", None) is None:
        return args
    conf = read_config(args.config)
    actions = {a.dest: a for a in parser._actions}
    for k, v in conf.items():
        if k not in actions or k == "config":
            raise CliError(f"unknown config key {k!r}")
        if getattr(args, k) is not None:
            continue
        act = actions[k]
        try:
            if isinstance(act, argparse._StoreTrueAction):
                val = v.lower() in ("1", "true", "yes", "on")
            else:
                val = act.type(v) if act.type else v
        except (TypeError, ValueError) as exc:
            raise CliError(f"config key {k!r}: {exc}") from exc
        if act.choices is not None and val not in act.choices:
            raise CliError(f"config key {k!r}: {val!r} not in {sorted(act.choices)}")
        setattr(args, k, val)
    return args


def _int_list(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _str_list(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    app = args.app
    seed = 0 if args.seed is None else args.seed
    R = args.R
    if app == "mc":
        inst = gen_mc(_need(args.p, "p"), _need(args.r, "r"), _need(args.N, "N"), 32 if args.d is None else args.d, seed)
    elif app == "psd":
        inst = gen_psd(_need(args.p, "p"), 1.0 if R is None else R, seed)
    elif app == "svm":
        R = DEFAULT_R if R is None else R
        if args.csv:
            inst = svm_from_csv(args.csv, _need(args.p, "p"), _need(args.q, "q"), R)
        else:
            inst = gen_svm(_need(args.N, "N"), _need(args.p, "p"), _need(args.q, "q"), R, seed=seed)
    else:
        R = DEFAULT_R if R is None else R
        if args.csv:
            inst = multiclass_from_csv(args.csv, args.M, R)
        else:
            inst = gen_multiclass(_need(args.N, "N"), _need(args.q, "q"), _need(args.M, "M"), R, seed)
    out = Path(args.out) if args.out else output_dir(args.out_dir) / f"{app}_seed{seed}.inst"
    save_instance(inst, out)
    print(out)
    return EXIT_OK


def _need(v, name):
    if v is None:
        raise CliError(f"--{name} is required")
    return v


# ------------------------------------------------------------------- solve

def build_problem(inst, dgf: str | None = None, radius: float | None = None):
    if isinstance(inst, McInstance):
        return build_mc_dual(inst, 1.0 if radius is None else radius, dgf=dgf or "euclidean")
    if isinstance(inst, PsdCompletionInstance):
        return build_psd_completion(inst, dgf=dgf or "power")
    if isinstance(inst, SvmInstance):
        return build_svm(inst)
    if isinstance(inst, MulticlassInstance):
        return build_multiclass(inst)
    raise CliError(f"unsupported instance {type(inst).__name__}")


def _load(path):
    try:
        return load_instance(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read instance {path}: {exc}") from exc


def first_resolution(problem) -> float:
    """Resolution of the one-step certificate at the omega-center, the scale for ``--rel-eps``."""
    y = problem.Y.center
    g = dual_eval(problem, y).grad
    return float(np.vdot(g, y)) + problem.Y.support(-g)[0]


def scg_trace(res) -> GapTrace:
    """Running minimum of the CG certified gap plus ``beta Omega^2 / 2``, an upper bound on ``Opt - f_*(x_t)``."""
    tr = GapTrace()
    smooth = 0.5 * res.beta * res.omega**2
    for t, g in enumerate(res.cg.gaps, 1):
        tr.update(t, max(g, 0.0) + smooth)
    return tr


@dataclass
class RunOutput:
    trace: GapTrace
    record: RunRecord
    error: str | None = None


def run_solver(problem, solver: str, budget: int, eps: float | None, m: int = 1, gamma: float = 0.5,
               theta: float = 0.5, online: bool = True, seed: int = 0, params: dict | None = None) -> RunOutput:
    """Run one solver; failures come back in ``error`` with the partial trace kept."""
    params = dict(params or {}, solver=solver, budget=budget, eps=eps, m=m, gamma=gamma, theta=theta, online=online)
    if solver == "scg":
        if eps is None:
            raise CliError("scg needs --eps")
        try:
            res = scg_run(problem, eps, budget=budget)
        except Exception as exc:  # noqa: BLE001 - reported through the exit code
            return RunOutput(GapTrace(), RunRecord("scg", params, seed), f"{type(exc).__name__}: {exc}")
        tr = scg_trace(res)
        rec = res.record(params, seed)
        rec.final_gap = tr.gap
        rec.extra.update(primal_value=problem.primal_value(res.x), x_rank=res.x.rank())
        return RunOutput(tr, rec)
    cfg = SolverConfig(eps=eps if eps is not None else (None if online else 1e-3), budget=budget, gamma=gamma,
                       theta=theta, m=m, L=estimate_Lf(problem), seed=seed, online=online)
    trace = GapTrace()
    try:
        res = SOLVERS[solver](DualField(problem), problem.Y, cfg, trace=trace)
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        rec = RunRecord(solver, params, seed, trace.gap, len(trace))
        return RunOutput(trace, rec, f"{type(exc).__name__}: {exc}")
    extra = {"status": res.status, "resolution": res.resolution, "max_delta": res.max_delta(), "phases": len(res.phases)}
    x_hat, y_hat = res.best()
    if x_hat is not None:
        f_dual = dual_eval(problem, y_hat, problem.X.exact()).value
        f_primal = problem.primal_value(x_hat)
        extra.update(duality_gap=f_dual - f_primal, primal_value=f_primal, dual_value=f_dual,
                     x_rank=x_hat.rank(), x_feasible=problem.X.contains(x_hat), y_feasible=problem.Y.contains(y_hat))
    rec = RunRecord(solver, params, seed, trace.gap, res.steps, res.wall_time, extra)
    return RunOutput(trace, rec)


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    if args.solver is None:
        raise CliError("--solver is required")
    budget = 1000 if args.budget is None else args.budget
    if budget < 1:
        raise CliError("--budget must be positive")
    if args.eps is not None and args.rel_eps is not None:
        raise CliError("give --eps or --rel-eps, not both")
    problem = build_problem(inst, args.dgf, args.R)
    eps = args.eps if args.rel_eps is None else args.rel_eps * first_resolution(problem)
    if args.target and eps is None:
        raise CliError("--target needs --eps or --rel-eps")
    out = run_solver(problem, args.solver, budget, eps, m=args.m or 1, gamma=args.gamma or 0.5,
                     theta=args.theta or 0.5, online=not args.target, params={"instance": str(args.instance)})
    d = output_dir(args.out_dir)
    stem = f"{Path(args.instance).stem}.{args.solver}"
    out.trace.to_csv(d / f"{stem}.trace.csv")
    if out.error:
        out.record.extra["error"] = out.error
    out.record.to_json(d / f"{stem}.run.json")
    if out.error:
        print(f"solver failed: {out.error}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{args.solver}: steps={out.record.steps} gap={fmt17(out.record.final_gap)} -> {d / stem}.*")
    return EXIT_OK


# ------------------------------------------------------------------- bench

def bench_cell(cell: tuple) -> list:
    path, solver, m, budget, eps, dgf = cell
    try:
        problem = build_problem(load_instance(path), dgf)
        out = run_solver(problem, solver, budget, eps, m=m, online=True)
    except Exception as exc:  # noqa: BLE001 - bench continues past failed cells
        return [str(path), solver, m, 0, "failed", *[math.nan] * 7, 0.0, f"{type(exc).__name__}: {exc}"]
    tr = out.trace
    if len(tr) == 0:
        return [str(path), solver, m, 0, "failed", *[math.nan] * 7, out.record.wall_time, out.error]
    g1 = tr.gap_at(1)
    cols = [tr.gap_at(c) for c in CHECKPOINTS] + [tr.gap_at(budget)]
    ratios = [g1 / g if g > 0 else math.inf for g in cols]
    status = "failed" if out.error else str(out.record.extra.get("status", "budget"))
    return [str(path), solver, m, len(tr), status, g1, *cols, *ratios, out.record.wall_time, out.error or ""]


def cmd_bench(args) -> int:
    solvers = _str_list(args.solvers or "nerml")
    bad = [s for s in solvers if s not in SOLVER_NAMES]
    if bad:
        raise CliError(f"unknown solvers {bad}; choose from {SOLVER_NAMES}")
    if "scg" in solvers and args.eps is None:
        raise CliError("scg needs --eps")
    mems = _int_list(args.m_list or "1")
    budget = 512 if args.budget is None else args.budget
    if budget < 1 or any(m < 1 for m in mems):
        raise CliError("budget and memories must be positive")
    for p in args.instances:
        _load(p)
    cells = []
    for p in args.instances:
        for s in solvers:
            for m in (mems if s == "nerml" else [1]):
                cells.append((p, s, m, budget, args.eps, args.dgf))
    workers = args.workers or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(bench_cell, cells))
    else:
        rows = [bench_cell(c) for c in cells]
    out = Path(args.out) if args.out else output_dir(args.out_dir) / "bench_summary.csv"
    write_summary(rows, out)
    print(out)
    return EXIT_OK


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_HEADER)
        for r in rows:
            w.writerow([fmt17(v) if isinstance(v, float) else v for v in r])


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != BENCH_HEADER:
            raise CliError(f"{path}: not a bench summary")
        return list(rd)


# ------------------------------------------------------------------ report

def format_report(rows: list[dict]) -> str:
    cols = ("instance", "solver", "m", "steps", "gap1", "gap1/gap32", "gap1/gap128", "gap1/gap_budget", "wall_time_sec")
    table = [list(cols)]
    for r in rows:
        line = []
        for c in cols:
            v = r[c]
            if c in ("instance", "solver", "m", "steps"):
                line.append(Path(v).name if c == "instance" else v)
            else:
                line.append(f"{float(v):.4g}")
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    lines = [REPORT_NOTE]
    for row in table:
        lines.append("  ".join(s.rjust(w) for s, w in zip(row, widths)))
    fails = [r for r in rows if r["error"]]
    for r in fails:
        lines.append(f"# failed: {Path(r['instance']).name} {r['solver']} m={r['m']}: {r['error']}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    rows = []
    for p in args.summaries:
        try:
            rows.extend(read_summary(p))
        except OSError as exc:
            raise CliError(str(exc)) from exc
    print(format_report(rows))
    return EXIT_OK


# -------------------------------------------------------------------- main

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualcert", description="Certified first-order solvers for bilinear saddle problems.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random (or CSV-ingested) instance file")
    g.add_argument("app", choices=("mc", "psd", "svm", "multiclass"))
    for name in ("p", "r", "N", "d", "q", "M", "seed"):
        g.add_argument(f"--{name}", type=int)
    g.add_argument("--R", type=float, help="domain radius (svm/multiclass default 10, an arbitrary choice)")
    g.add_argument("--csv", help="labelled dataset, label column first (svm, multiclass)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one solver on an instance file")
    s.add_argument("instance")
    s.add_argument("--solver", choices=SOLVER_NAMES)
    s.add_argument("--budget", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--rel-eps", dest="rel_eps", type=float, help="target as a fraction of the first-step resolution")
    s.add_argument("--m", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--dgf", choices=("euclidean", "power"))
    s.add_argument("--R", type=float, help="nuclear-ball radius for mc (default 1)")
    s.add_argument("--target", action="store_true", default=None, help="stop once the resolution reaches --eps")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="fixed-step-budget sweep over instances, solvers and memories")
    b.add_argument("instances", nargs="+")
    b.add_argument("--solvers", help="comma separated, from md,mdl,nerml,scg")
    b.add_argument("--m-list", dest="m_list", help="NERML memories, comma separated")
    b.add_argument("--budget", type=int)
    b.add_argument("--eps", type=float, help="smoothing target for scg")
    b.add_argument("--dgf", choices=("euclidean", "power"))
    b.add_argument("--workers", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="print bench summaries as a table")
    r.add_argument("summaries", nargs="+")
    r.set_defaults(func=cmd_report)

    for p in (g, s, b):
        p.add_argument("--config", help="key = value file; command-line flags win")
        p.add_argument("--out-dir", dest="out_dir")
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    try:
        apply_config(sub, args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
