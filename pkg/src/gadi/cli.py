"""Command-line front end: problem generation, single solves, omega scans, oracle checks and sweeps.

Exit codes are 0 on success, 2 on usage errors and 3 on solver failures;
failures also print one JSON object ``{"error": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import oracle, records
from .care import CareProblem, kleinman_newton
from .errors import GadiError
from .lyap import SOLVERS, LyapProblem, SolveOptions, gadi_dense_iterates, rgadi_iterates
from .matcore import materialize, max_singular_value, min_singular_value
from .probgen import Family, ProblemSpec, generate
from .shifts import geometric_eig_shift, omega_scan

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 2, 3


class UsageError(Exception):
    pass


class SolverFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_sizes(text):
    """``"128..1024"`` doubles from 128 up to 1024; ``"8,16,40"`` is taken literally."""
    if ".." in text:
        lo, hi = (int(t) for t in text.split("..", 1))
        if lo < 2 or hi < lo:
            raise UsageError(f"bad size range {text!r}")
        sizes = []
        while lo <= hi:
            sizes.append(lo)
            lo *= 2
        return sizes
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise UsageError(f"bad size list {text!r}") from None


def parse_alpha(text):
    if text in (None, "maxsigma", "geomeig"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number, 'maxsigma' or 'geomeig', got {text!r}") from None
    if not value > 0:
        raise UsageError("--alpha must be positive")
    return value


def _alpha_value(choice, F):
    """Concrete shift for ``F``; ``None`` leaves the solver default (max singular value)."""
    if choice in (None, "maxsigma"):
        return None
    if choice == "geomeig":
        return geometric_eig_shift(F).alpha_star
    return choice


def _options(args, alpha):
    try:
        return SolveOptions(
            alpha=alpha,
            beta=getattr(args, "beta", None),
            omega=args.omega,
            tol=args.tol,
            max_iter=args.max_iter,
            criterion=getattr(args, "criterion", "res"),
            compress_tol=args.compress_tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_problem(args, want_care):
    if getattr(args, "matrix", None):
        mats = [records.read_matrix_market(p) for p in args.matrix]
        if want_care:
            if len(mats) != 3:
                raise UsageError("--matrix needs A, B and C files for a Riccati problem")
            return "file", CareProblem(mats[0], np.asarray(_dense(mats[1])), np.asarray(_dense(mats[2])))
        if len(mats) != 2:
            raise UsageError("--matrix needs F and C files for a Lyapunov problem")
        return "file", LyapProblem(mats[0], np.asarray(_dense(mats[1])))
    if args.family is None:
        raise UsageError("either --family or --matrix is required")
    try:
        spec = ProblemSpec(args.family, args.n, args.seed, args.p, args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.family.is_care != want_care:
        kind = "Riccati" if want_care else "Lyapunov"
        raise UsageError(f"family {spec.family.value!r} is not a {kind} family")
    return spec.family.value, generate(spec)


def _dense(M):
    return M.toarray() if hasattr(M, "toarray") else M


# --- single cells -------------------------------------------------------------


def run_lyap(problem, solver, family, opts):
    """Solve one Lyapunov problem and return its :class:`RunRecord`."""
    opts_used = opts
    if solver == "r2adi" and opts.beta is None:
        opts_used = opts.replace(beta=min_singular_value(problem.F))
    t0 = time.perf_counter()
    sol = SOLVERS[solver](problem, opts=opts_used)
    wall = (time.perf_counter() - t0) * 1e3
    return records.RunRecord(
        family=family, n=problem.n, p=problem.p, m=0, solver=solver,
        alpha=float(sol.alpha), omega=None if sol.omega is None else float(sol.omega),
        beta=None if sol.beta is None else float(sol.beta),
        criterion=opts.criterion.value, tol=float(opts.tol), iterations=sol.iterations,
        residual_history=sol.residual_history, width_history=sol.width_history,
        converged=sol.converged, wall_ms=wall, compress_tol=sol.compress_tol,
    )


def run_care(problem, family, opts):
    t0 = time.perf_counter()
    sol = kleinman_newton(problem, opts=opts)
    wall = (time.perf_counter() - t0) * 1e3
    alpha = opts.alpha if opts.alpha is not None else sol.alphas[-1] if sol.alphas else None
    return records.RunRecord(
        family=family, n=problem.n, p=problem.p, m=problem.m, solver="kn-rgadi",
        alpha=None if alpha is None else float(alpha), omega=float(opts.omega), beta=None,
        criterion=opts.criterion.value, tol=float(opts.tol), iterations=sol.outer_iterations,
        residual_history=sol.residual_history, width_history=sol.width_history,
        converged=sol.converged, wall_ms=wall, inner_iterations=sol.inner_iterations,
        compress_tol=opts.compress_tol,
    )


def _bench_cell(cell):
    family, n, solver, seed, opts_kwargs, alpha_choice = cell
    problem = generate(ProblemSpec(family, n, seed))
    F = problem.F if isinstance(problem, LyapProblem) else -problem.A
    opts = SolveOptions(alpha=_alpha_value(alpha_choice, F), **opts_kwargs)
    if isinstance(problem, CareProblem):
        return run_care(problem, family, opts)
    return run_lyap(problem, solver, family, opts)


# --- verify -------------------------------------------------------------------


def verify_checks(n, seed=0):
    """Oracle cross-checks at size ``n``; returns ``[(name, passed, detail)]``."""
    out = []

    def check(name, err, tol):
        out.append((name, bool(err <= tol), f"{err:.3e} <= {tol:g}"))

    lp = generate(ProblemSpec(Family.RANDOM_POSITIVE_REAL, n, seed))
    F, Q = lp.F.toarray(), lp.Q()
    X = oracle.lyap_kron_solve(F, Q)
    check("kron solve residual", np.linalg.norm(F.T @ X + X @ F - Q, 2) / np.linalg.norm(Q, 2), 1e-11)

    alpha = max_singular_value(lp.F, fallback=True)
    beta = min_singular_value(lp.F)
    from .lyap import r1_adi_iterates, r2_adi_iterates

    k = 6
    lr1 = [materialize(f) for _, f in zip(range(k), r1_adi_iterates(lp, alpha))]
    lr2 = [materialize(f) for _, f in zip(range(k), r2_adi_iterates(lp, alpha, beta))]
    d1 = oracle.adi1_dense(F, Q, alpha, k, history=True)
    d2 = oracle.adi2_dense(F, Q, alpha, beta, k, history=True)
    check("r1adi vs dense ADI", max(np.linalg.norm(a - b) for a, b in zip(lr1, d1)), 1e-11)
    check("r2adi vs dense ADI", max(np.linalg.norm(a - b) for a, b in zip(lr2, d2)), 1e-11)

    omega = 0.015
    lrg = [materialize(f) for _, f in zip(range(k), rgadi_iterates(lp, alpha, omega))]
    dg = [X_ for _, X_ in zip(range(k), gadi_dense_iterates(lp, alpha, omega))]
    check("rgadi vs dense GADI", max(np.linalg.norm(a - b) for a, b in zip(lrg, dg)), 1e-10)

    sol = SOLVERS["rgadi"](lp, SolveOptions(alpha=alpha, omega=omega, max_iter=30))
    check("rgadi vs kron solution", np.linalg.norm(sol.solution() - X), 1e-9)

    cp = generate(ProblemSpec(Family.CARE341, n, seed))
    Xc = oracle.care_newton_exact(cp)
    care_sol = kleinman_newton(cp)
    check("kleinman-newton vs exact newton", np.linalg.norm(care_sol.solution() - Xc), 1e-8)
    return out


# --- command handlers ---------------------------------------------------------


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_records(recs, args):
    _emit(records.dumps(recs, args.format), args.out)
    if getattr(args, "history", None):
        Path(args.history).write_text(records.history_csv(recs[-1].residual_history))


def cmd_gen(args):
    family, problem = _load_problem(args, Family(args.family).is_care if args.family else False)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{family}_n{problem.n}"
    if isinstance(problem, CareProblem):
        parts = {"A": problem.A, "B": problem.B, "C": problem.C}
    else:
        parts = {"F": problem.F, "C": problem.C}
    written = []
    for name, M in parts.items():
        path = outdir / f"{stem}_{name}.mtx"
        records.write_matrix_market(path, M)
        written.append(str(path))
    print(json.dumps({"files": written}))
    return EXIT_OK


def cmd_lyap(args):
    family, problem = _load_problem(args, want_care=False)
    opts = _options(args, _alpha_value(args.alpha, problem.F))
    rec = run_lyap(problem, args.solver, family, opts)
    _emit_records([rec], args)
    if not rec.converged:
        raise SolverFailure(f"{args.solver} did not reach tol {opts.tol} in {opts.max_iter} iterations")
    return EXIT_OK


def cmd_care(args):
    family, problem = _load_problem(args, want_care=True)
    opts = _options(args, _alpha_value(args.alpha, -problem.A))
    rec = run_care(problem, family, opts)
    _emit_records([rec], args)
    return EXIT_OK


def cmd_scan_omega(args):
    family, problem = _load_problem(args, want_care=False)
    try:
        omegas = [float(w) for w in args.omegas.split(",")]
    except ValueError:
        raise UsageError(f"bad omega list {args.omegas!r}") from None
    if any(not 0 <= w < 2 for w in omegas):
        raise UsageError("omega candidates must lie in [0, 2)")
    alpha = _alpha_value(args.alpha, problem.F)
    best, table = omega_scan(problem, omegas, alpha=alpha, budget=args.budget)
    _emit(json.dumps({"family": family, "n": problem.n, "best_omega": best, "table": table}, indent=2), args.out)
    return EXIT_OK


def cmd_verify(args):
    if not 2 <= args.n <= oracle.MAX_N:
        raise UsageError(f"verify needs 2 <= n <= {oracle.MAX_N}")
    rows = verify_checks(args.n, args.seed)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    if not all(ok for _, ok, _ in rows):
        raise SolverFailure("oracle cross-checks failed")
    return EXIT_OK


def cmd_bench(args):
    family = Family(args.family)
    solvers = ["kn-rgadi"] if family.is_care else [s.strip() for s in args.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in SOLVERS and s != "kn-rgadi"]
    if unknown:
        raise UsageError(f"unknown solvers {unknown}")
    opts_kwargs = dict(
        omega=args.omega, beta=args.beta, tol=args.tol, max_iter=args.max_iter,
        criterion=args.criterion, compress_tol=args.compress_tol,
    )
    _options(args, None)  # validate once up front
    cells = [
        (family.value, n, s, args.seed, opts_kwargs, args.alpha)
        for n in parse_sizes(args.n_spec) for s in solvers
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            recs = list(pool.map(_bench_cell, cells))
    else:
        recs = [_bench_cell(c) for c in cells]
    _emit(records.dumps(recs, args.format), args.out)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _add_problem_args(p, default_family):
    p.add_argument("--family", default=default_family, choices=[f.value for f in Family])
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=1, help="rows of C (random families)")
    p.add_argument("--m", type=int, default=1, help="columns of B (random Riccati family)")
    p.add_argument("--matrix", nargs="+", metavar="MTX", help="Matrix Market inputs instead of --family")


def _add_solver_args(p):
    p.add_argument("--alpha", type=str, default=None, help="number, 'maxsigma' or 'geomeig'")
    p.add_argument("--omega", type=float, default=0.015)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--criterion", choices=["res", "feedback"], default="res")
    p.add_argument("--compress-tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser():
    parser = _Parser(prog="gadi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="write a generated problem as Matrix Market files")
    _add_problem_args(p, None)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("lyap", help="solve a Lyapunov equation")
    _add_problem_args(p, None)
    _add_solver_args(p)
    p.add_argument("--solver", choices=sorted(SOLVERS), default="rgadi")
    p.add_argument("--history", default=None, help="also write iteration,residual CSV here")
    p.set_defaults(func=cmd_lyap)

    p = sub.add_parser("care", help="solve a Riccati equation by Kleinman-Newton with low-rank GADI")
    _add_problem_args(p, None)
    _add_solver_args(p)
    p.add_argument("--history", default=None)
    p.set_defaults(func=cmd_care)

    p = sub.add_parser("scan-omega", help="compare omega candidates at a fixed sweep budget")
    _add_problem_args(p, None)
    p.add_argument("--alpha", type=str, default=None)
    p.add_argument("--omegas", default="0,0.015,0.5,1.0")
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scan_omega)

    p = sub.add_parser("verify", help="cross-check solvers against brute-force references")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="sweep problem sizes and emit one run record per cell")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--n", dest="n_spec", default="128..1024")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solvers", default="rgadi")
    p.add_argument("--jobs", type=int, default=1)
    _add_solver_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if hasattr(args, "alpha"):
            args.alpha = parse_alpha(args.alpha)
        return args.func(args)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_USAGE)
    except SolverFailure as exc:
        return _fail("SolverFailure", str(exc), EXIT_SOLVER)
    except (GadiError, ArithmeticError, ValueError, MemoryError, np.linalg.LinAlgError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
