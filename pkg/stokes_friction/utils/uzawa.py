# Projected Uzawa iteration for the Stokes problem with a friction law on Gamma1.
#
# Step 1: solve the Stokes system with the boundary load -(v_trace, lambda) for (u, p).
# Step 2: lambda <- Proj(lambda + rho * trace(u)), nodewise clipping to [-1, 1].
# k_itr is the first k >= 2 whose H1 velocity increment is at most tol. The iteration
# continues past k_itr until the fixed-point residual of (u, lambda) is at most 10 tol.

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import torch

from stokes_friction.models.config_friction import BoundaryCondition, PressureGauge, UzawaParams
from stokes_friction.models.manufactured import ManufacturedCase
from stokes_friction.modules.mesh import Mesh
from stokes_friction.modules.spaces import DofMap
from stokes_friction.ops.assembly import (
    assemble_a,
    assemble_b,
    assemble_h1_gram,
    assemble_load,
    assemble_trace_coupling,
    pressure_integrals,
)
from stokes_friction.ops.friction_boundary import (
    BoundaryTrace,
    FrictionModulus,
    j_h,
    lambda_norm,
    project_tilde,
    sgn,
)
from stokes_friction.ops.saddle_solver import (
    Factorization,
    SaddleSystem,
    factorize,
    lattice_coordinates,
    solve,
)
from stokes_friction.ops.sparse import SparseOperator

logger = logging.getLogger(__name__)


class InvalidPairingError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, max_iter, last_increment, solution=None, level=None):
        super().__init__(message)
        self.max_iter = max_iter
        self.last_increment = last_increment
        self.solution = solution
        self.level = level


class NodeState(str, Enum):
    STICK = "stick"
    SLIP = "slip"
    LEAK_IN = "leak-in"  # u_n < 0
    LEAK_OUT = "leak-out"  # u_n > 0


@dataclass
class IterationRecord:
    k: int
    increment_h1: float
    energy_residual: float
    n_active_nodes: int


@dataclass(eq=False)
class UzawaSystem:
    """Operators that stay fixed across Uzawa iterations."""

    mesh: Mesh
    dofmap: DofMap
    g: FrictionModulus
    load: torch.Tensor
    coupling: SparseOperator
    gram: SparseOperator
    factorization: Factorization

    @property
    def a(self) -> SparseOperator:
        return self.factorization.system.a

    @property
    def b(self) -> SparseOperator:
        return self.factorization.system.b


@dataclass(eq=False)
class DiscreteSolution:

    system: UzawaSystem
    velocity: torch.Tensor  # free velocity dofs
    pressure: torch.Tensor  # vertex values
    multiplier: BoundaryTrace
    k_itr: int  # first k meeting the increment test
    increment: float
    rho: float
    tol: float
    n_iter: int  # iterations run, >= k_itr
    log: List[IterationRecord] = field(default_factory=list)

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @property
    def dofmap(self) -> DofMap:
        return self.system.dofmap

    @property
    def bc(self) -> BoundaryCondition:
        return self.system.dofmap.bc

    @property
    def velocity_full(self) -> torch.Tensor:
        return self.dofmap.prolong(self.velocity)

    @property
    def trace(self) -> BoundaryTrace:
        return BoundaryTrace.from_interior(self.dofmap.trace_of(self.velocity))


def prepare_system(
    mesh: Mesh,
    dofmap: DofMap,
    case: ManufacturedCase,
    g: FrictionModulus,
    gauge: Optional[PressureGauge] = None,
    factorization: Optional[Factorization] = None,
) -> UzawaSystem:
    gauge = dofmap.bc.default_gauge if gauge is None else PressureGauge(gauge)
    if factorization is None:
        saddle = SaddleSystem(
            a=assemble_a(mesh, dofmap, case.nu),
            b=assemble_b(mesh, dofmap),
            gauge=gauge,
            pressure_weights=pressure_integrals(mesh),
            lattice=lattice_coordinates(mesh, dofmap),
        )
        factorization = factorize(saddle)
    return UzawaSystem(
        mesh=mesh,
        dofmap=dofmap,
        g=g,
        load=assemble_load(mesh, dofmap, case),
        coupling=assemble_trace_coupling(dofmap.trace, dofmap, g),
        gram=assemble_h1_gram(mesh, dofmap),
        factorization=factorization,
    )


def solve_step(system: UzawaSystem, multiplier: BoundaryTrace) -> Tuple[torch.Tensor, torch.Tensor]:
    rhs = system.load - system.coupling.rmatvec(multiplier.interior)
    return solve(system.factorization, rhs)


def energy_residual(
    system: UzawaSystem, velocity: torch.Tensor, g: Optional[FrictionModulus] = None
) -> float:
    g = system.g if g is None else g
    trace = BoundaryTrace.from_interior(system.dofmap.trace_of(velocity))
    work = float(torch.dot(system.load, velocity))
    energy = float(system.a.quadratic_form(velocity)) + float(j_h(trace, g, system.dofmap.trace))
    return abs(energy - work) / max(1.0, abs(work))


def run_uzawa(
    mesh: Mesh,
    dofmap: DofMap,
    case: ManufacturedCase,
    g: FrictionModulus,
    params: UzawaParams,
    bc_kind: BoundaryCondition,
    gauge: Optional[PressureGauge] = None,
    system: Optional[UzawaSystem] = None,
) -> DiscreteSolution:
    bc_kind = BoundaryCondition(bc_kind)
    if bc_kind is not dofmap.bc:
        raise InvalidPairingError(
            f"Boundary condition {bc_kind.value} does not match the dof map ({dofmap.bc.value})"
        )
    gauge = bc_kind.default_gauge if gauge is None else PressureGauge(gauge)
    if gauge is not bc_kind.default_gauge:
        raise InvalidPairingError(
            f"{bc_kind.value} requires the {bc_kind.default_gauge.value} pressure gauge, "
            f"got {gauge.value}"
        )
    if system is None:
        system = prepare_system(mesh, dofmap, case, g, gauge)
    elif system.factorization.system.gauge is not gauge:
        raise InvalidPairingError("Prepared system was factorized with a different gauge")

    trace = dofmap.trace
    if isinstance(params.lambda_init, torch.Tensor):
        lam = BoundaryTrace.from_interior(params.lambda_init.expand(dofmap.n_multiplier))
    else:
        lam = BoundaryTrace.constant(trace, params.lambda_init)
    lam = project_tilde(lam)

    log: List[IterationRecord] = []
    u_prev = None
    increment = math.inf
    k_itr = None
    for k in range(1, params.max_iter + 1):
        u, p = solve_step(system, lam)
        if u_prev is not None:
            du = u - u_prev
            increment = math.sqrt(max(float(system.gram.quadratic_form(du)), 0.0))
        record = IterationRecord(
            k=k,
            increment_h1=increment,
            energy_residual=energy_residual(system, u),
            n_active_nodes=int((lam.interior.abs() == 1.0).sum()),
        )
        log.append(record)
        logger.debug(
            "uzawa k=%d increment=%.3e energy_residual=%.3e active=%d",
            k, record.increment_h1, record.energy_residual, record.n_active_nodes,
        )
        if k_itr is None and increment <= params.tol:
            k_itr = k
        sol = DiscreteSolution(
            system=system, velocity=u, pressure=p, multiplier=lam,
            k_itr=k if k_itr is None else k_itr, increment=increment, rho=params.rho,
            tol=params.tol, n_iter=k, log=log,
        )
        if k_itr is not None:
            residual = fixed_point_residual(sol, params.rho)
            if residual <= 10 * params.tol:
                logger.info(
                    "%s uzawa converged at k=%d (N=%d, rho=%g, increment=%.3e, "
                    "fixed-point residual %.3e after %d iterations)",
                    bc_kind.value, k_itr, mesh.n, params.rho, increment, residual, k,
                )
                return sol
        lam = project_tilde(lam + sol.trace * params.rho)
        u_prev = u
    raise NonConvergenceError(
        f"Uzawa iteration did not converge in {params.max_iter} iterations "
        f"(last increment {increment:.3e}, tol {params.tol:.1e}, rho {params.rho:g}"
        + (f", increment test met at k={k_itr})" if k_itr is not None else ")"),
        max_iter=params.max_iter,
        last_increment=increment,
        solution=sol,
    )


def fixed_point_residual(sol: DiscreteSolution, rho: float) -> float:
    """||Proj(lambda + rho trace(u)) - lambda|| in the Lambda_h norm."""
    lam = sol.multiplier
    moved = project_tilde(lam + sol.trace * rho)
    return float(lambda_norm(moved - lam, sol.system.g, sol.dofmap.trace))


def energy_identity_residual(
    sol: DiscreteSolution, case: ManufacturedCase, g: FrictionModulus
) -> float:
    """|a(u, u) + j_h(trace u) - (f, u)| / max(1, |(f, u)|)."""
    load = assemble_load(sol.mesh, sol.dofmap, case)
    work = float(torch.dot(load, sol.velocity))
    energy = float(sol.system.a.quadratic_form(sol.velocity))
    energy += float(j_h(sol.trace, g, sol.dofmap.trace))
    return abs(energy - work) / max(1.0, abs(work))


@dataclass
class ComplementarityReport:

    x: torch.Tensor  # interior trace node abscissae
    trace_values: torch.Tensor
    multiplier: torch.Tensor
    states: List[NodeState]
    max_sign_mismatch: float  # max |lambda - sgn(trace)| over slipping nodes
    max_abs_multiplier: float

    @property
    def n_stick(self) -> int:
        return sum(s is NodeState.STICK for s in self.states)

    @property
    def n_moving(self) -> int:
        return len(self.states) - self.n_stick

    @property
    def n_positive(self) -> int:
        return int((self.trace_values > 0).logical_and(self._moving).sum())

    @property
    def n_negative(self) -> int:
        return int((self.trace_values < 0).logical_and(self._moving).sum())

    @property
    def _moving(self) -> torch.Tensor:
        return torch.tensor([s is not NodeState.STICK for s in self.states], dtype=torch.bool)


def stick_threshold(sol: DiscreteSolution) -> torch.Tensor:
    """Per-node trace bound implied by a fixed-point residual of 10 tol.

    A node whose multiplier is not clipped contributes w_i g_i (rho u_i)^2 to the squared
    residual, so |u_i| <= 10 tol / (rho sqrt(w_i g_i)) there.
    """
    trace = sol.dofmap.trace
    w = (trace.weights * sol.system.g.nodal(trace, strict=False))[1:-1]
    return 10 * sol.tol / (sol.rho * w.sqrt())


def complementarity_report(
    sol: DiscreteSolution, slip_threshold: Optional[float] = None
) -> ComplementarityReport:
    values = sol.dofmap.trace_of(sol.velocity)
    lam = sol.multiplier.interior
    threshold = stick_threshold(sol) if slip_threshold is None else slip_threshold
    moving = values.abs() > threshold
    states = []
    for is_moving, v in zip(moving.tolist(), values.tolist()):
        if not is_moving:
            states.append(NodeState.STICK)
        elif sol.bc is BoundaryCondition.SBCF:
            states.append(NodeState.SLIP)
        else:
            states.append(NodeState.LEAK_OUT if v > 0 else NodeState.LEAK_IN)
    mismatch = (lam - sgn(values)).abs()[moving]
    return ComplementarityReport(
        x=sol.dofmap.trace.x[1:-1],
        trace_values=values,
        multiplier=lam,
        states=states,
        max_sign_mismatch=float(mismatch.max()) if mismatch.numel() else 0.0,
        max_abs_multiplier=float(lam.abs().max()),
    )
