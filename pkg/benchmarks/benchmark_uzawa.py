import argparse
import time

from stokes_friction.models.config_friction import BoundaryCondition, SolverConfig, UzawaParams, default_rho
from stokes_friction.models.friction_stokes import FrictionStokesSolver, discretization


parser = argparse.ArgumentParser(description="Assembly, factorization and Uzawa timing")
parser.add_argument("--bc", type=str, default="sbcf", choices=["sbcf", "lbcf"])
parser.add_argument("--g", type=float, default=0.8)
parser.add_argument("--rho", type=float, default=None)
parser.add_argument("--levels", type=int, nargs="+", default=[10, 20, 40, 80])
parser.add_argument("--tol", type=float, default=1e-5)
parser.add_argument("--repeats", type=int, default=3)
args = parser.parse_args()

bc = BoundaryCondition(args.bc)
rho = default_rho(bc, args.g) if args.rho is None else args.rho
print(f"{bc.value} g={args.g} rho={rho} tol={args.tol}")

for n in args.levels:
    discretization.cache_clear()
    start = time.time()
    disc = discretization(n, bc, 1.0)
    setup_time = time.time() - start
    config = SolverConfig(n=n, bc=bc, g=args.g, uzawa=UzawaParams(rho=rho, tol=args.tol))
    solver = FrictionStokesSolver(config)
    sol = solver.solve()
    start = time.time()
    for _ in range(args.repeats):
        solver.solve()
    solve_time = (time.time() - start) / args.repeats
    size = disc.factorization.kkt.shape[0]
    print(
        f"N={n}: {size} unknowns, fill {disc.factorization.fill}, "
        f"assembly + factorization {setup_time * 1000:.0f}ms, "
        f"uzawa {solve_time * 1000:.0f}ms for k_itr={sol.k_itr}, {sol.n_iter} iterations "
        f"({solve_time / sol.n_iter * 1000:.2f}ms per iteration)"
    )
