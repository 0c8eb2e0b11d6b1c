import argparse
import logging
import sys
from typing import List, Optional, Sequence

from stokes_friction.models.config_friction import (
    DEFAULT_LEVELS,
    DEFAULT_REFERENCE,
    FALLBACK_REFERENCE,
    MULTIPLIER_TABLE_COLUMNS,
    BoundaryCondition,
    PressureGauge,
    PressureNormalization,
    RunConfig,
    SolverConfig,
    StudyConfig,
    UzawaParams,
    default_rho,
)
from stokes_friction.models.friction_stokes import FrictionStokesSolver
from stokes_friction.ops.saddle_solver import ResidualError, SingularSystemError
from stokes_friction.utils.analysis import NonNestedError, run_convergence_study, threshold_experiment
from stokes_friction.utils.io import (
    write_iteration_log,
    write_multiplier_csv,
    write_multiplier_table,
    write_threshold_csv,
    write_vtk,
)
from stokes_friction.utils.uzawa import InvalidPairingError, NonConvergenceError

logger = logging.getLogger(__name__)

SOLVER_ERRORS = (
    NonConvergenceError,
    SingularSystemError,
    ResidualError,
    InvalidPairingError,
    NonNestedError,
)


def parse_column(text: str):
    """BC,G,RHO,LAMBDA0 -> (BoundaryCondition, g, rho, lambda0)."""
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected BC,G,RHO,LAMBDA0, got {text!r}")
    try:
        bc, g, rho, lambda_init = (
            BoundaryCondition(parts[0].lower()), float(parts[1]), float(parts[2]), float(parts[3])
        )
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid column {text!r}: {e}")
    if not g > 0:
        raise argparse.ArgumentTypeError(f"invalid column {text!r}: g must be positive")
    if not rho > 0:
        raise argparse.ArgumentTypeError(f"invalid column {text!r}: rho must be positive")
    return bc, g, rho, lambda_init


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-friction",
        description="P2/P1 Stokes solver with slip or leak boundary conditions of friction type",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log every Uzawa iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    iteration = argparse.ArgumentParser(add_help=False)
    iteration.add_argument("--nu", type=float, default=1.0)
    iteration.add_argument("--tol", type=float, default=1e-5)
    iteration.add_argument("--max-iter", type=int, default=1000)

    solve = sub.add_parser("solve", parents=[iteration], help="one Uzawa run with field output")
    solve.add_argument("--bc", choices=[b.value for b in BoundaryCondition], default="sbcf")
    solve.add_argument("--gauge", choices=["auto"] + [g.value for g in PressureGauge], default="auto")
    solve.add_argument("--g", type=float, required=True)
    solve.add_argument("--n", type=int, default=10)
    solve.add_argument("--rho", type=float, default=None)
    solve.add_argument("--lambda-init", type=float, default=0.0)
    solve.add_argument("--out", default="solution", help="output prefix")

    conv = sub.add_parser("convergence", parents=[iteration], help="error table against a reference")
    conv.add_argument("--bc", choices=[b.value for b in BoundaryCondition], default="sbcf")
    conv.add_argument("--g", type=float, required=True)
    conv.add_argument("--levels", type=int, nargs="+", default=list(DEFAULT_LEVELS))
    conv.add_argument(
        "--ref",
        type=int,
        default=DEFAULT_REFERENCE,
        help=f"reference level that every level divides; {FALLBACK_REFERENCE} with "
        "--levels 10 20 40 is the desk-scale protocol",
    )
    conv.add_argument("--rho", type=float, default=None)
    conv.add_argument("--lambda-init", type=float, default=0.0)
    conv.add_argument(
        "--normalization",
        choices=[p.value for p in PressureNormalization],
        default=PressureNormalization.POINT_MATCH.value,
    )
    conv.add_argument("--out", default="convergence.csv")

    thr = sub.add_parser("thresholds", parents=[iteration], help="max trace velocity per g")
    thr.add_argument("--bc", choices=[b.value for b in BoundaryCondition], default="sbcf")
    thr.add_argument("--g-values", type=float, nargs="+", required=True)
    thr.add_argument("--n", type=int, default=10)
    thr.add_argument("--rho", type=float, default=None)
    thr.add_argument("--out", default="thresholds.csv")

    table = sub.add_parser("multiplier-table", parents=[iteration], help="multiplier samples on y=1")
    table.add_argument("--n", type=int, default=10)
    table.add_argument("--column", type=parse_column, action="append", default=None)
    table.add_argument("--out", default="multiplier_table.csv")
    return parser


def parse_run_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    """Validate flags before any computation; conflicts end in parser.error (exit 2)."""
    if getattr(args, "rho", None) is not None and not args.rho > 0:
        parser.error(f"argument --rho: must be positive, got {args.rho}")
    try:
        if args.command == "solve":
            bc = BoundaryCondition(args.bc)
            if args.gauge != "auto" and PressureGauge(args.gauge) is not bc.default_gauge:
                parser.error(
                    f"argument --gauge: {args.gauge} conflicts with --bc {bc.value} "
                    f"(requires --gauge {bc.default_gauge.value})"
                )
            rho = default_rho(bc, args.g) if args.rho is None else args.rho
            uzawa = UzawaParams(
                rho=rho, lambda_init=args.lambda_init, tol=args.tol, max_iter=args.max_iter
            )
            solver = SolverConfig(n=args.n, bc=bc, nu=args.nu, g=args.g, uzawa=uzawa)
            return RunConfig(command="solve", solver=solver, output=args.out)
        if args.command == "convergence":
            study = StudyConfig(
                bc=args.bc, g=args.g, levels=args.levels, reference=args.ref, rho=args.rho,
                lambda_init=args.lambda_init, tol=args.tol, max_iter=args.max_iter, nu=args.nu,
                normalization=args.normalization, output=args.out,
            )
            for n in study.levels:
                if study.reference % n != 0:
                    parser.error(f"argument --levels: {n} does not divide --ref {study.reference}")
            return RunConfig(command="convergence", study=study, output=args.out)
        if args.command == "thresholds":
            if any(not g > 0 for g in args.g_values):
                parser.error("argument --g-values: every g must be positive")
            solver = SolverConfig(
                n=args.n, bc=args.bc, nu=args.nu,
                uzawa=UzawaParams(tol=args.tol, max_iter=args.max_iter),
            )
            return RunConfig(
                command="thresholds", solver=solver, g_values=args.g_values, rho=args.rho,
                output=args.out,
            )
        columns = tuple(args.column) if args.column else MULTIPLIER_TABLE_COLUMNS
        solver = SolverConfig(
            n=args.n, nu=args.nu, uzawa=UzawaParams(tol=args.tol, max_iter=args.max_iter)
        )
        return RunConfig(
            command="multiplier-table", solver=solver, columns=columns, output=args.out
        )
    except ValueError as e:
        parser.error(str(e))


def cmd_solve(config: RunConfig) -> List[str]:
    solver = FrictionStokesSolver(config.solver)
    prefix = config.output
    paths = [f"{prefix}.vtk", f"{prefix}_multiplier.csv", f"{prefix}_log.csv"]
    try:
        sol = solver.solve()
    except NonConvergenceError as e:
        if e.solution is not None:
            write_iteration_log(e.solution, paths[2])
        raise
    write_vtk(paths[0], sol)
    write_multiplier_csv(sol, paths[1])
    write_iteration_log(sol, paths[2])
    return paths


def cmd_multiplier_table(config: RunConfig) -> str:
    names, solutions = [], []
    for bc, g, rho, lambda_init in config.columns:
        uzawa = UzawaParams(
            rho=rho, lambda_init=lambda_init,
            tol=config.solver.uzawa.tol, max_iter=config.solver.uzawa.max_iter,
        )
        settings = SolverConfig(n=config.solver.n, bc=bc, nu=config.solver.nu, g=g, uzawa=uzawa)
        solutions.append(FrictionStokesSolver(settings).solve())
        names.append(f"{bc.value}_g{g:g}_rho{rho:g}_l{lambda_init:g}")
    write_multiplier_table(names, solutions, config.output)
    return config.output


def cmd_convergence(config: RunConfig) -> str:
    run_convergence_study(config.study)
    return config.output


def cmd_thresholds(config: RunConfig) -> str:
    solver = config.solver
    rows = threshold_experiment(
        solver.bc,
        config.g_values,
        n=solver.n,
        rho=config.rho,
        tol=solver.uzawa.tol,
        max_iter=solver.uzawa.max_iter,
    )
    write_threshold_csv(rows, config.output)
    return config.output


COMMANDS = {
    "solve": cmd_solve,
    "multiplier-table": cmd_multiplier_table,
    "convergence": cmd_convergence,
    "thresholds": cmd_thresholds,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    config = parse_run_config(args, parser)
    try:
        outputs = COMMANDS[config.command](config)
    except SOLVER_ERRORS as e:
        print(f"stokes-friction {config.command}: {e}", file=sys.stderr)
        return 1
    logger.info("Wrote %s", outputs)
    return 0
