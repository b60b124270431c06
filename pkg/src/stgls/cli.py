"""Command-line driver: ``stgls {solve,converge,adapt,compare-cn,condition}``.

Every subcommand also accepts ``--config FILE``, a flat ``key=value`` file
whose keys are long option names (dashes or underscores). Flags given on
the command line win over the file. Exit status is 0 on success, 1 when a
run fails and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .adapt import AdaptConfig, AdaptError, adapt_loop
from .assembly import GlsParams, assemble
from .driver import convergence_study, loglog_slope, solve_problem
from .estimate import error_norms, estimate, profile_peak, sample_profile
from .linsolve import SolveConfig, estimate_condition
from .mesh import balance_2to1, uniform_mesh
from .problems import PROBLEMS, make_problem
from .seqref import TimeMarchConfig, crank_nicolson

__all__ = ["main", "build_parser", "parse_level_range"]

log = logging.getLogger("stgls")


class UsageError(Exception):
    pass


def parse_level_range(text: str) -> list[int]:
    """``"3-6"`` or ``"3,4,5"`` to a list of levels."""
    text = str(text).strip()
    try:
        if "-" in text:
            lo, hi = (int(s) for s in text.split("-", 1))
            levels = list(range(lo, hi + 1))
        else:
            levels = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}") from None
    if not levels or min(levels) < 0:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}")
    return levels


def _point(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad point {text!r}") from None


def _on_off(text: str) -> bool:
    val = str(text).lower()
    if val in ("on", "true", "1", "yes"):
        return True
    if val in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _common(p: argparse.ArgumentParser, problem="heat_mms"):
    p.add_argument("--config", type=Path, help="key=value file; flags override it")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default=problem)
    p.add_argument("--dim", type=int, choices=(1, 2), default=None, help="space dimension")
    p.add_argument("--degree", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--nu", type=float, default=None, help="diffusivity (problem default if omitted)")
    p.add_argument("--gls", type=_on_off, default=True, help="on/off")
    p.add_argument("--c1", type=float, default=4.0)
    p.add_argument("--c2", type=float, default=2.0)
    p.add_argument("--solver", choices=("auto", "bicgstab", "gmres", "direct"), default="auto")
    p.add_argument("--precond", choices=("none", "jacobi", "block-jacobi", "ilu"), default="jacobi")
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("-o", "--output-dir", type=Path, default=Path("out"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stgls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve on a uniform mesh, write VTK and errors")
    _common(p)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--dump-matrix", action="store_true", help="also write MatrixMarket files")

    p = sub.add_parser("converge", help="uniform refinement study")
    _common(p)
    p.add_argument("--levels", type=parse_level_range, default=parse_level_range("3-6"))

    p = sub.add_parser("adapt", help="adaptive refinement loop")
    _common(p, problem="gaussian_source")
    p.add_argument("--level", type=int, default=3, help="initial uniform level")
    p.add_argument("--eta-tol", type=float, default=float("inf"))
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--max-level", type=int, default=7)
    p.add_argument("--marking", choices=("threshold", "fixed_fraction"), default="threshold")
    p.add_argument("--theta", type=float, default=0.5)

    p = sub.add_parser("compare-cn", help="space-time vs Crank-Nicolson profiles")
    _common(p, problem="rotating_gaussian")
    p.add_argument("--level", type=int, default=6)
    p.add_argument("--start", type=_point, default=(0.0, 2 / 3), help="x,y of profile start")
    p.add_argument("--end", type=_point, default=(2 / 3, 0.0), help="x,y of profile end")
    p.add_argument("--samples", type=int, default=2001)

    p = sub.add_parser("condition", help="condition estimate with and without stabilization")
    _common(p, problem="advdiff_mms")
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--iters", type=int, default=200)
    p.set_defaults(nu=1e-6)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "config")}
    try:
        lines = Path(args.config).read_text().splitlines()
    except OSError as exc:
        subparser.error(f"cannot read config: {exc}")
    defaults = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            subparser.error(f"{args.config}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None:
            subparser.error(f"{args.config}:{n}: unknown key {key!r}")
        try:
            val = action.type(value) if action.type else value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            subparser.error(f"{args.config}:{n}: {exc}")
        if isinstance(action, argparse._StoreTrueAction):
            val = _on_off(value)
        if action.choices is not None and val not in action.choices:
            subparser.error(f"{args.config}:{n}: {key} must be one of {list(action.choices)}")
        defaults[dest] = val
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _problem(args):
    try:
        return make_problem(args.problem, nu=args.nu, dim_space=args.dim)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _gls(args) -> GlsParams:
    return GlsParams(c1=args.c1, c2=args.c2, enabled=args.gls)


def _solve_cfg(args) -> SolveConfig | None:
    if args.solver == "auto":
        return None
    return SolveConfig(method=args.solver, preconditioner=args.precond, rel_tol=args.rtol,
                       max_iters=args.max_iters)


def cmd_solve(args) -> int:
    problem = _problem(args)
    mesh = uniform_mesh(problem.domain, args.level)
    gls = _gls(args)
    sol = solve_problem(mesh, problem, args.degree, gls, _solve_cfg(args))
    out = args.output_dir
    est = estimate(sol.field, problem, gls=gls)
    io.write_field_vtk(out / "solution.vtk", sol.field, cell_data={"eta": est.eta_K})
    print(f"dofs={sol.system.n} eta={est.eta:.6e} iterations={sol.report.iterations}")
    if problem.exact is not None:
        err = error_norms(sol.field, problem, gls=gls)
        io.write_csv(out / "errors.csv", io.ERROR_HEADER,
                     [(float(mesh.h.max()), sol.system.n, err.err_l2, err.err_h, err.err_h_star, est.eta)])
        print(f"err_l2={err.err_l2:.6e} err_h={err.err_h:.6e} err_h_star={err.err_h_star:.6e}")
    if args.dump_matrix:
        io.write_matrix_market(out / "matrix.mtx", sol.system)
    return 0


def cmd_converge(args) -> int:
    if len(args.levels) < 3:
        raise UsageError("converge needs at least three levels")
    problem = _problem(args)
    if problem.exact is None:
        raise UsageError(f"{problem.name} has no exact solution")
    rows = convergence_study(problem, args.levels, args.degree, _gls(args), _solve_cfg(args))
    io.write_csv(args.output_dir / "convergence.csv", io.CONVERGENCE_HEADER,
                 [(r.h, r.eta, r.err_h, r.err_l2) for r in rows])
    h = [r.h for r in rows]
    for name in io.CONVERGENCE_HEADER[1:]:
        slope = loglog_slope(h, [getattr(r, name) for r in rows])
        print(f"slope {name}: {slope:.3f}")
    return 0


def cmd_adapt(args) -> int:
    problem = _problem(args)
    cfg = AdaptConfig(eta_tol=args.eta_tol, max_rounds=args.max_rounds, max_level=args.max_level,
                      marking=args.marking, theta=args.theta)
    mesh = balance_2to1(uniform_mesh(problem.domain, args.level))
    try:
        field, trace = adapt_loop(problem, args.degree, mesh, cfg, _solve_cfg(args), _gls(args))
    except AdaptError as exc:
        _write_trace(args.output_dir, exc.trace)
        raise
    _write_trace(args.output_dir, trace)
    io.write_field_vtk(args.output_dir / "final_mesh.vtk", field)
    last = trace.rounds[-1]
    print(f"rounds={len(trace)} reason={trace.reason} dofs={last.dofs} eta={last.eta:.6e}"
          f" levels={int(last.mesh.levels.min())}-{int(last.mesh.levels.max())}")
    return 0


def _write_trace(out, trace):
    io.write_csv(out / "trace.csv", io.TRACE_HEADER, [(r.round, r.dofs, r.eta, r.err_l2) for r in trace])


def cmd_compare_cn(args) -> int:
    problem = _problem(args)
    if problem.domain.dim_space != 2 or len(args.start) != 2 or len(args.end) != 2:
        raise UsageError("compare-cn needs two space dimensions and 2-D profile endpoints")
    mesh = uniform_mesh(problem.domain, args.level)
    sol = solve_problem(mesh, problem, args.degree, _gls(args), _solve_cfg(args))
    cn = crank_nicolson(problem, TimeMarchConfig(args.level, args.degree), snapshot_times=(0.0, 1.0))
    h = float(mesh.h.max())
    peaks = {}
    for method in ("spacetime", "cn"):
        for t in (0.0, 1.0):
            if method == "spacetime":
                arc, u = sample_profile(sol.field, (*args.start, t), (*args.end, t), args.samples)
            else:
                arc, u = sample_profile(cn.snapshots[t], args.start, args.end, args.samples)
            io.write_profile_csv(args.output_dir / method / f"profile_t_{t:g}.csv", arc, u)
            peaks[method, t] = profile_peak(arc, u)
    for method in ("spacetime", "cn"):
        s0, _ = peaks[method, 0.0]
        s1, u1 = peaks[method, 1.0]
        print(f"{method}: peak t=0 at {s0:.6f}, t=1 at {s1:.6f} (height {u1:.6f}),"
              f" displacement {abs(s1 - s0):.6f} = {abs(s1 - s0) / h:.3f} h")
    return 0


def cmd_condition(args) -> int:
    problem = _problem(args)
    mesh = uniform_mesh(problem.domain, args.level)
    results = []
    for enabled in (True, False):
        gls = GlsParams(c1=args.c1, c2=args.c2, enabled=enabled)
        system, _ = assemble(mesh, problem, args.degree, gls)
        est = estimate_condition(system.matrix, iters=args.iters)
        results.append(("stabilized" if enabled else "unstabilized", est))
        print(f"{results[-1][0]}: kappa={est.kappa:.6e} sigma_max={est.sigma_max:.6e}"
              f" sigma_min={est.sigma_min:.6e}")
    io.write_csv(args.output_dir / "condition.csv", ("system", "kappa", "sigma_max", "sigma_min"),
                 [(name, e.kappa, e.sigma_max, e.sigma_min) for name, e in results])
    return 0


_COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "adapt": cmd_adapt,
             "compare-cn": cmd_compare_cn, "condition": cmd_condition}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"stgls {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit 1
        log.debug("run failed", exc_info=True)
        print(f"stgls {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
