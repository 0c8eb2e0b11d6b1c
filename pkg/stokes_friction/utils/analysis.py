# Error norms between nested discrete solutions, convergence tables and the threshold
# experiment. Coarse fields are evaluated exactly at fine quadrature points: each fine
# triangle lies inside one coarse triangle, found from its centroid.

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import torch
from einops import rearrange

from stokes_friction.models.config_friction import (
    BoundaryCondition,
    PressureNormalization,
    SolverConfig,
    StudyConfig,
    UzawaParams,
    default_rho,
)
from stokes_friction.models.friction_stokes import FrictionStokesSolver
from stokes_friction.models.manufactured import ManufacturedCase
from stokes_friction.modules.mesh import Mesh, mesh_size
from stokes_friction.modules.spaces import interpolate_pressure, interpolate_velocity
from stokes_friction.ops.assembly import element_geometry
from stokes_friction.ops.quadrature import p2_basis, p2_basis_grad_bary
from stokes_friction.utils.io import write_convergence_csv
from stokes_friction.utils.uzawa import (
    DiscreteSolution,
    NonConvergenceError,
    complementarity_report,
)

logger = logging.getLogger(__name__)


class NonNestedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VelocityField:
    mesh: Mesh
    coefficients: torch.Tensor  # raw interleaved P2 coefficients


@dataclass(frozen=True, eq=False)
class PressureField:
    mesh: Mesh
    values: torch.Tensor  # P1 vertex values


VelocityLike = Union[DiscreteSolution, VelocityField]
PressureLike = Union[DiscreteSolution, PressureField]


def velocity_field(obj: VelocityLike) -> VelocityField:
    if isinstance(obj, VelocityField):
        return obj
    return VelocityField(obj.mesh, obj.velocity_full)


def pressure_field(obj: PressureLike) -> PressureField:
    if isinstance(obj, PressureField):
        return obj
    return PressureField(obj.mesh, obj.pressure)


def interpolant(mesh: Mesh, case: ManufacturedCase) -> Tuple[VelocityField, PressureField]:
    return (
        VelocityField(mesh, interpolate_velocity(mesh, case.velocity)),
        PressureField(mesh, interpolate_pressure(mesh, case.pressure)),
    )


def _host_barycentrics(coarse: Mesh, fine: Mesh):
    if fine.n % coarse.n != 0:
        raise NonNestedError(f"Mesh N={coarse.n} is not nested in mesh N={fine.n}")
    centroids = fine.vertices[fine.triangles].mean(dim=1)
    tri, _ = coarse.locate(centroids)
    grad = element_geometry(coarse).grad_bary[tri]  # (ntf, 3, 2)
    host_centroids = coarse.vertices[coarse.triangles[tri]].mean(dim=1)
    offsets = element_geometry(fine).points - host_centroids[:, None, :]
    # barycentrics are affine and equal 1/3 at the host centroid
    bary = 1.0 / 3.0 + torch.einsum("tad,tqd->tqa", grad, offsets)
    return tri, bary, grad


def sample_velocity(obj: VelocityLike, fine: Mesh) -> Tuple[torch.Tensor, torch.Tensor]:
    """Values (ntf, nq, 2) and gradients (ntf, nq, 2, 2) at the quadrature points of fine."""
    fld = velocity_field(obj)
    tri, bary, grad = _host_barycentrics(fld.mesh, fine)
    nodal = rearrange(fld.coefficients, "(n c) -> n c", c=2)[fld.mesh.p2_triangles[tri]]
    phi = p2_basis(bary)
    dphi = torch.einsum("tqka,tad->tqkd", p2_basis_grad_bary(bary), grad)
    values = torch.einsum("tqk,tkc->tqc", phi, nodal)
    grads = torch.einsum("tqkd,tkc->tqcd", dphi, nodal)
    return values, grads


def sample_pressure(obj: PressureLike, fine: Mesh) -> torch.Tensor:
    fld = pressure_field(obj)
    tri, bary, _ = _host_barycentrics(fld.mesh, fine)
    return torch.einsum("tqa,ta->tq", bary, fld.values[fld.mesh.triangles[tri]])


def h1_error(coarse: VelocityLike, fine: VelocityLike) -> float:
    fine_mesh = velocity_field(fine).mesh
    uc, gc = sample_velocity(coarse, fine_mesh)
    uf, gf = sample_velocity(fine, fine_mesh)
    w = element_geometry(fine_mesh).weights
    sq = ((uc - uf) ** 2).sum(-1) + ((gc - gf) ** 2).sum((-2, -1))
    return math.sqrt(float((w * sq).sum()))


def _shift(
    coarse: PressureField, fine_values: torch.Tensor, fine_origin: float, pc, w, normalization
) -> float:
    if normalization is PressureNormalization.POINT_MATCH:
        # vertex 0 is the corner (0, 0)
        return fine_origin - float(coarse.values[0])
    return float((w * (fine_values - pc)).sum() / w.sum())


def l2_pressure_error(
    coarse: PressureLike,
    fine: PressureLike,
    normalization: PressureNormalization = PressureNormalization.POINT_MATCH,
) -> float:
    normalization = PressureNormalization(normalization)
    fine_fld = pressure_field(fine)
    pc = sample_pressure(coarse, fine_fld.mesh)
    pf = sample_pressure(fine_fld, fine_fld.mesh)
    w = element_geometry(fine_fld.mesh).weights
    shift = _shift(pressure_field(coarse), pf, float(fine_fld.values[0]), pc, w, normalization)
    return math.sqrt(float((w * (pc + shift - pf) ** 2).sum()))


def h1_error_exact(obj: VelocityLike, case: ManufacturedCase) -> float:
    fld = velocity_field(obj)
    geo = element_geometry(fld.mesh)
    uh, gh = sample_velocity(fld, fld.mesh)
    sq = ((uh - case.velocity(geo.points)) ** 2).sum(-1)
    sq = sq + ((gh - case.velocity_gradient(geo.points)) ** 2).sum((-2, -1))
    return math.sqrt(float((geo.weights * sq).sum()))


def l2_pressure_error_exact(
    obj: PressureLike,
    case: ManufacturedCase,
    normalization: PressureNormalization = PressureNormalization.MEAN_ZERO,
) -> float:
    normalization = PressureNormalization(normalization)
    fld = pressure_field(obj)
    geo = element_geometry(fld.mesh)
    ph = sample_pressure(fld, fld.mesh)
    pe = case.pressure(geo.points)
    origin = float(case.pressure(torch.zeros(2, dtype=torch.float64)))
    shift = _shift(fld, pe, origin, ph, geo.weights, normalization)
    return math.sqrt(float((geo.weights * (ph + shift - pe) ** 2).sum()))


def fit_order(levels: Sequence[int], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(1/N)."""
    if len(levels) < 2:
        raise ValueError("Fitting an order needs at least two levels")
    x = -torch.log(torch.tensor(levels, dtype=torch.float64))
    y = torch.log(torch.tensor(errors, dtype=torch.float64))
    xc, yc = x - x.mean(), y - y.mean()
    return float((xc * yc).sum() / (xc * xc).sum())


def pair_rates(levels: Sequence[int], errors: Sequence[float]) -> List[float]:
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(levels[i + 1] / levels[i])
        for i in range(len(levels) - 1)
    ]


Offset = namedtuple("Offset", ["from_multiplier", "from_pressure"])


def pressure_offset(sol_a: DiscreteSolution, sol_b: DiscreteSolution, g: float) -> Offset:
    """Constant delta with lambda_b = lambda_a + delta / g and p_b = p_a + delta.

    Estimated once from the multipliers (mean over interior nodes) and once from the
    pressures (mean over the domain).
    """
    from_multiplier = float((g * (sol_b.multiplier.interior - sol_a.multiplier.interior)).mean())
    geo = element_geometry(sol_a.mesh)
    diff = sample_pressure(sol_b, sol_a.mesh) - sample_pressure(sol_a, sol_a.mesh)
    from_pressure = float((geo.weights * diff).sum() / geo.weights.sum())
    return Offset(from_multiplier, from_pressure)


@dataclass
class StudyRow:
    n: int
    h: float
    h1_error: float
    l2_error: float
    k_itr: int
    h1_rate: Optional[float] = None
    l2_rate: Optional[float] = None


@dataclass
class ConvergenceStudy:

    bc: BoundaryCondition
    g: float
    reference: int
    normalization: PressureNormalization
    rows: List[StudyRow] = field(default_factory=list)

    @property
    def levels(self) -> List[int]:
        return [r.n for r in self.rows]

    @property
    def h1_errors(self) -> List[float]:
        return [r.h1_error for r in self.rows]

    @property
    def l2_errors(self) -> List[float]:
        return [r.l2_error for r in self.rows]

    @property
    def h1_rates(self) -> List[float]:
        return [r.h1_rate for r in self.rows[1:]]

    @property
    def l2_rates(self) -> List[float]:
        return [r.l2_rate for r in self.rows[1:]]

    def h1_order(self) -> float:
        return fit_order(self.levels, self.h1_errors)

    def l2_order(self) -> float:
        return fit_order(self.levels, self.l2_errors)


def _solve_level(config: StudyConfig, n: int) -> DiscreteSolution:
    solver = FrictionStokesSolver(
        SolverConfig(n=n, bc=config.bc, nu=config.nu, g=config.g, uzawa=config.uzawa_params())
    )
    try:
        return solver.solve()
    except NonConvergenceError as e:
        raise NonConvergenceError(
            f"level N={n}: {e}", e.max_iter, e.last_increment, e.solution, level=n
        ) from e


def run_convergence_study(config: StudyConfig) -> ConvergenceStudy:
    for n in config.levels:
        if config.reference % n != 0:
            raise NonNestedError(f"Level N={n} does not divide the reference N={config.reference}")
    logger.info("Reference solve %s g=%g at N=%d", config.bc.value, config.g, config.reference)
    reference = _solve_level(config, config.reference)

    study = ConvergenceStudy(
        bc=config.bc, g=config.g, reference=config.reference, normalization=config.normalization
    )
    for n in config.levels:
        sol = _solve_level(config, n)
        row = StudyRow(
            n=n,
            h=mesh_size(sol.mesh),
            h1_error=h1_error(sol, reference),
            l2_error=l2_pressure_error(sol, reference, config.normalization),
            k_itr=sol.k_itr,
        )
        if study.rows:
            prev = study.rows[-1]
            row.h1_rate = pair_rates([prev.n, n], [prev.h1_error, row.h1_error])[0]
            row.l2_rate = pair_rates([prev.n, n], [prev.l2_error, row.l2_error])[0]
        study.rows.append(row)
        logger.info(
            "N=%d h1_error=%.3e l2_error=%.3e k_itr=%d", n, row.h1_error, row.l2_error, row.k_itr
        )

    if config.output is not None:
        write_convergence_csv(study, config.output)
    return study


@dataclass
class ThresholdRow:
    g: float
    rho: float
    max_trace: float
    n_stick: int
    n_moving: int
    n_positive: int
    n_negative: int
    k_itr: int


def threshold_experiment(
    bc: BoundaryCondition,
    g_values: Sequence[float],
    n: int = 10,
    rho: Optional[float] = None,
    tol: float = 1e-5,
    max_iter: int = 1000,
    slip_threshold: Optional[float] = None,
) -> List[ThresholdRow]:
    """Max trace velocity and stick/slip (stick/leak) counts on Gamma1 for each g.

    Without an explicit slip_threshold a node sticks when its trace is within the bound
    the converged fixed-point residual puts on it (see stick_threshold).
    """
    bc = BoundaryCondition(bc)
    if not g_values:
        raise ValueError("threshold_experiment needs at least one g value")
    rows = []
    for g in g_values:
        step = default_rho(bc, g) if rho is None else rho
        params = UzawaParams(rho=step, tol=tol, max_iter=max_iter)
        sol = FrictionStokesSolver(SolverConfig(n=n, bc=bc, g=g, uzawa=params)).solve()
        report = complementarity_report(sol, slip_threshold)
        rows.append(
            ThresholdRow(
                g=g,
                rho=step,
                max_trace=float(report.trace_values.abs().max()),
                n_stick=report.n_stick,
                n_moving=report.n_moving,
                n_positive=report.n_positive,
                n_negative=report.n_negative,
                k_itr=sol.k_itr,
            )
        )
        logger.info(
            "%s g=%g: max trace %.3e, %d moving nodes",
            bc.value, g, rows[-1].max_trace, report.n_moving,
        )
    return rows
