import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from stokes_friction.models.config_friction import BoundaryCondition, SolverConfig, UzawaParams
from stokes_friction.models.manufactured import ManufacturedCase
from stokes_friction.modules.mesh import Mesh, build_friedrichs_keller
from stokes_friction.modules.spaces import DofMap, build_dof_map
from stokes_friction.ops.assembly import assemble_a, assemble_b, pressure_integrals
from stokes_friction.ops.friction_boundary import FrictionModulus
from stokes_friction.ops.saddle_solver import (
    Factorization,
    SaddleSystem,
    factorize,
    lattice_coordinates,
)
from stokes_friction.utils.uzawa import (
    DiscreteSolution,
    InvalidPairingError,
    prepare_system,
    run_uzawa,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Discretization:

    mesh: Mesh
    dofmap: DofMap
    factorization: Factorization


@lru_cache(maxsize=4)
def discretization(n: int, bc: BoundaryCondition, nu: float) -> Discretization:
    """Mesh, dofs and the factorized Stokes matrix, shared by every run on (N, bc, nu)."""
    bc = BoundaryCondition(bc)
    mesh = build_friedrichs_keller(n)
    dofmap = build_dof_map(mesh, bc)
    saddle = SaddleSystem(
        a=assemble_a(mesh, dofmap, nu),
        b=assemble_b(mesh, dofmap),
        gauge=bc.default_gauge,
        pressure_weights=pressure_integrals(mesh),
        lattice=lattice_coordinates(mesh, dofmap),
    )
    logger.info("Factorizing %s system for N=%d, nu=%g", bc.value, n, nu)
    return Discretization(mesh=mesh, dofmap=dofmap, factorization=factorize(saddle))


class FrictionStokesSolver:
    """Manufactured-solution Stokes problem with a friction law on y = 1."""

    def __init__(self, config: SolverConfig, g: Optional[FrictionModulus] = None):
        self.config = config
        if config.gauge is not config.bc.default_gauge:
            raise InvalidPairingError(
                f"--bc {config.bc.value} conflicts with --gauge {config.gauge.value}: "
                f"{config.bc.value} requires {config.bc.default_gauge.value}"
            )
        disc = discretization(config.n, config.bc, config.nu)
        self.mesh = disc.mesh
        self.dofmap = disc.dofmap
        self.case = ManufacturedCase(nu=config.nu)
        self.g = FrictionModulus.constant(config.g) if g is None else g
        self.system = prepare_system(
            self.mesh, self.dofmap, self.case, self.g, config.gauge, disc.factorization
        )

    def solve(self, params: Optional[UzawaParams] = None) -> DiscreteSolution:
        params = self.config.uzawa if params is None else params
        return run_uzawa(
            self.mesh,
            self.dofmap,
            self.case,
            self.g,
            params,
            self.config.bc,
            gauge=self.config.gauge,
            system=self.system,
        )

    @classmethod
    def from_settings(cls, bc, g, n=10, rho=1.0, lambda_init=0.0, tol=1e-5, max_iter=1000, nu=1.0):
        uzawa = UzawaParams(rho=rho, lambda_init=lambda_init, tol=tol, max_iter=max_iter)
        return cls(SolverConfig(n=n, bc=bc, nu=nu, g=g, uzawa=uzawa))
