"""Command-line entry point ``invobs``.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 numeric error,
5 property failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .integrator import StepRejected
from .lie_core import AtCutLocus, exp, is_close
from .observer import (
    LinearizedPair,
    NotObservable,
    design_gain_adjoint,
    design_gain_pole,
    linearize,
    observability_rank,
    stability_check,
)
from .sim import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_PROPERTY,
    EXIT_VALIDATION,
    SYSTEMS,
    ScenarioError,
    SimRecord,
    ValidationError,
    default_ubar,
    gain_weights,
    make_system,
    property_suite,
    run_scenario,
    summary_text,
)
from .trajectories import PermanentTrajectory, closure_period, is_permanent, permanent_state, required_input

NUMERIC_ERRORS = (AtCutLocus, NotObservable, StepRejected, FloatingPointError, np.linalg.LinAlgError)

# rotating permanent motions by default so that the closure report is meaningful
PERMANENT_UBAR = {"car": (1.0, 0.5), "attitude": (0.3, -0.2, 0.5), "attitude-mag-only": (0.3, -0.2, 0.5)}


def _vector(values: Optional[Sequence[float]], size: int, name: str) -> Optional[np.ndarray]:
    if values is None:
        return None
    arr = np.asarray(values, dtype=float)
    if arr.shape != (size,):
        raise ValidationError(f"--{name} needs {size} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"--{name} must be finite")
    return arr


def _matrix_json(M: np.ndarray):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        return [[float(v.real), float(v.imag)] for v in M]
    return M.tolist()


def _table(title: str, M: np.ndarray, rows: Sequence[str], cols: Sequence[str]) -> str:
    width = 12
    out = [title, " " * 10 + "".join(f"{c:>{width}}" for c in cols)]
    for name, row in zip(rows, np.atleast_2d(M)):
        out.append(f"{name:<10}" + "".join(f"{v:>{width}.5g}" for v in row))
    return "\n".join(out)


def _build_gain(system, pair: LinearizedPair, ubar, poles, K) -> Optional[np.ndarray]:
    if poles is not None and K is not None:
        raise ValidationError("give either --poles or --K, not both")
    if poles is not None:
        if len(poles) != system.dim:
            raise ValidationError(f"--poles needs {system.dim} values, got {len(poles)}")
        return design_gain_pole(pair.A, pair.C, poles)
    if K is not None:
        return design_gain_adjoint(system, gain_weights(system, K), ubar).gain
    return None


def _linear_report(system, ubar, poles, K) -> tuple[dict, str]:
    pair = linearize(system, None, ubar)
    L = _build_gain(system, pair, ubar, poles, K)
    rank = observability_rank(pair.A, pair.C, tol=1e-6)
    basis = list(system.group.basis.names)
    outputs = [f"y_{i + 1}" for i in range(system.output_dim)]
    doc = {
        "system": system.name,
        "basis": basis,
        "ubar": None if ubar is None else ubar.tolist(),
        "A": pair.A.tolist(),
        "C": pair.C.tolist(),
        "observability_rank": rank,
        "dim": system.dim,
        "observable": rank == system.dim,
    }
    human = [_table("A", pair.A, basis, basis), _table("C", pair.C, outputs, basis)]
    if L is not None:
        closed = LinearizedPair(pair.A, pair.C, L)
        report = stability_check(closed)
        doc.update(
            L=L.tolist(),
            closed_loop=closed.closed_loop.tolist(),
            eigenvalues=_matrix_json(report.eigenvalues),
            stable=report.stable,
            symmetric_part=report.symmetric_verdict,
        )
        human += [_table("L", L, basis, outputs), _table("A + L C", closed.closed_loop, basis, basis)]
        human.append("eigenvalues: " + ", ".join(f"{v:.6g}" for v in report.eigenvalues))
    human.append(f"observability rank: {rank} / {system.dim}" + ("" if rank == system.dim else "  (unobservable)"))
    return doc, "\n\n".join(human)


def cmd_linearize(args) -> int:
    system = make_system(args.system)
    ubar = _vector(args.ubar, system.input_dim, "ubar")
    if ubar is None:
        ubar = default_ubar(system)
    doc, human = _linear_report(system, ubar, args.poles, args.K)
    print(json.dumps(doc, indent=2))
    print()
    print(human)
    return EXIT_OK


def cmd_gains(args) -> int:
    system = make_system(args.system)
    if args.poles is None and args.K is None:
        raise ValidationError("gains needs --poles or --K")
    ubar = _vector(args.ubar, system.input_dim, "ubar")
    if ubar is None:
        ubar = default_ubar(system)
    doc, human = _linear_report(system, ubar, args.poles, args.K)
    keep = ("system", "basis", "ubar", "L", "eigenvalues", "stable", "symmetric_part")
    print(json.dumps({k: doc[k] for k in keep}, indent=2))
    print()
    print(human)
    return EXIT_OK


def cmd_check(args) -> int:
    results = property_suite(args.system, samples=args.samples, seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_PROPERTY


def cmd_permanent(args) -> int:
    system = make_system(args.system)
    grp = system.group
    ubar = _vector(args.ubar, system.input_dim, "ubar")
    if ubar is None:
        ubar = np.asarray(PERMANENT_UBAR.get(system.name, np.ones(system.input_dim)), dtype=float)
    x0 = _vector(args.x0, grp.dim, "x0")
    x0 = exp(grp, np.zeros(grp.dim) if x0 is None else x0)
    if not args.duration > 0 or args.samples < 2:
        raise ValidationError("--duration must be positive and --samples >= 2")
    traj = PermanentTrajectory(system, x0, ubar, args.duration)
    ts = np.linspace(0.0, args.duration, args.samples)
    states = [permanent_state(traj, t) for t in ts]
    inputs = np.array([required_input(traj, t) for t in ts])
    if args.perturb:
        inputs[:, 0] += args.perturb * np.sin(ts)
    verdict, dev = is_permanent(system, states, inputs)

    cols = ["t"] + [f"x_{n}" for n in grp.param_names] + [f"u_{i + 1}" for i in range(system.input_dim)]
    record = SimRecord(cols, np.column_stack([ts, np.array([x.data for x in states]), inputs]))
    summary = {
        "system": system.name,
        "ubar": ubar.tolist(),
        "wbar": traj.wbar.tolist(),
        "permanent": bool(verdict),
        "max_invariant_deviation": dev,
    }
    period = closure_period(traj)
    if period is not None:
        summary["period"] = period
        summary["closed_after_period"] = bool(is_close(permanent_state(traj, period), x0, atol=1e-9))
    if args.out:
        record.write(args.out)
        print(summary_text(summary))
    else:
        sys.stdout.write(record.to_csv())
        print(summary_text(summary), file=sys.stderr)
    return EXIT_OK if verdict else EXIT_PROPERTY


def _simulate_one(path: str, out: str) -> tuple[str, int, str]:
    try:
        record, summary = run_scenario(path)
        record.write(out)
        summary["csv"] = out
        return path, EXIT_OK, summary_text(summary)
    except ScenarioError as exc:
        return path, exc.exit_code, str(exc)


def cmd_simulate(args) -> int:
    if args.batch:
        batch = Path(args.batch)
        files = sorted(batch.glob("*.toml"))
        if not files:
            raise ValidationError(f"no *.toml scenarios in {batch}")
        out_dir = Path(args.out) if args.out else batch
        jobs = args.jobs or min(len(files), os.cpu_count() or 1)
        work = [(str(f), str(out_dir / (f.stem + ".csv"))) for f in files]
        if jobs == 1:
            results = [_simulate_one(*w) for w in work]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_simulate_one, *zip(*work)))
        code = EXIT_OK
        for path, rc, text in results:
            print(text if rc == EXIT_OK else f"error ({rc}): {text}", file=sys.stdout if rc == EXIT_OK else sys.stderr)
            code = max(code, rc)
        return code
    if not args.file:
        raise ValidationError("simulate needs a scenario file or --batch")
    out = args.out or str(Path(args.file).with_suffix(".csv"))
    path, rc, text = _simulate_one(args.file, out)
    print(text if rc == EXIT_OK else f"error ({rc}): {text}", file=sys.stdout if rc == EXIT_OK else sys.stderr)
    return rc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invobs", description="Invariant observers on Lie groups")
    sub = parser.add_subparsers(dest="command", required=True)
    systems = [s for s in SYSTEMS]

    p = sub.add_parser("simulate", help="run a scenario file (or a directory of them)")
    p.add_argument("file", nargs="?")
    p.add_argument("--out", help="CSV path (directory with --batch)")
    p.add_argument("--batch", help="directory of *.toml scenarios run concurrently")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (
        ("linearize", cmd_linearize, "print A, C and optionally A + L C"),
        ("gains", cmd_gains, "design a gain matrix by poles or adjoint weights"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("system", choices=systems)
        p.add_argument("--ubar", type=float, nargs="+")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--poles", type=float, nargs="+")
        g.add_argument("--K", type=float, nargs="+")
        p.set_defaults(func=func)

    p = sub.add_parser("check", help="run the randomized property suite")
    p.add_argument("system", choices=systems)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("permanent", help="sample a permanent trajectory and test it")
    p.add_argument("system", choices=systems)
    p.add_argument("--ubar", type=float, nargs="+")
    p.add_argument("--x0", type=float, nargs="+", help="initial state, exponential coordinates")
    p.add_argument("--duration", type=float, default=4 * np.pi)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--perturb", type=float, default=0.0, help="add eps*sin(t) to the first input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_permanent)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
