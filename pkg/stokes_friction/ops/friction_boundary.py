# Multiplier space on Gamma1: piecewise quadratic traces vanishing at the two corners,
# the Simpson-lumped g-weighted inner product, the lumped friction functional, and the
# nodewise projection onto the unit box.

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import torch
import torch.nn.functional as F

from stokes_friction.modules.mesh import Gamma1Trace
from stokes_friction.ops.quadrature import gauss_legendre

MIN_EXACT_POINTS = 32


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Coefficients on M_1, M_{3/2}, ..., M_{m+1}; batched over leading dims.

    The endpoint slots are kept explicitly and are always exactly zero.
    """

    values: torch.Tensor

    def __post_init__(self):
        if self.values.shape[-1] < 3:
            raise ValueError(f"A trace needs at least 3 nodes, got {self.values.shape[-1]}")
        if bool((self.values[..., 0] != 0).any()) or bool((self.values[..., -1] != 0).any()):
            raise ValueError("Trace coefficients at the Gamma1 endpoints must be 0")

    @classmethod
    def from_interior(cls, interior: torch.Tensor) -> "BoundaryTrace":
        return cls(F.pad(interior.to(torch.float64), (1, 1)))

    @classmethod
    def zeros(cls, trace: Gamma1Trace) -> "BoundaryTrace":
        return cls(torch.zeros(trace.n_nodes, dtype=torch.float64))

    @classmethod
    def constant(cls, trace: Gamma1Trace, value: float) -> "BoundaryTrace":
        return cls.from_interior(torch.full((trace.n_nodes - 2,), float(value)))

    @property
    def interior(self) -> torch.Tensor:
        return self.values[..., 1:-1]

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.values + other.values)

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        return BoundaryTrace(self.values - other.values)

    def __mul__(self, scale: float) -> "BoundaryTrace":
        return BoundaryTrace(self.values * scale)

    __rmul__ = __mul__

    def __neg__(self) -> "BoundaryTrace":
        return BoundaryTrace(-self.values)


class ModulusKind(str, Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class FrictionModulus:
    """Stress threshold g on Gamma1: constant, affine g(x) = a + b x, or nodal values."""

    kind: ModulusKind
    coefficients: Tuple[float, ...] = ()
    table: torch.Tensor = None

    @classmethod
    def constant(cls, value: float) -> "FrictionModulus":
        return cls(ModulusKind.CONSTANT, (float(value),))

    @classmethod
    def affine(cls, intercept: float, slope: float) -> "FrictionModulus":
        return cls(ModulusKind.AFFINE, (float(intercept), float(slope)))

    @classmethod
    def tabulated(cls, nodal: torch.Tensor) -> "FrictionModulus":
        return cls(ModulusKind.TABULATED, table=nodal.to(torch.float64))

    def nodal(self, trace: Gamma1Trace, strict: bool = True) -> torch.Tensor:
        if self.kind is ModulusKind.TABULATED:
            if self.table.shape[-1] != trace.n_nodes:
                raise ValueError(
                    f"Tabulated modulus has {self.table.shape[-1]} values for "
                    f"{trace.n_nodes} trace nodes"
                )
            values = self.table
        else:
            values = self.evaluate(trace.x)
        if strict and not bool((values[1:-1] > 0).all()):
            raise ValueError("Friction modulus must be positive at interior Gamma1 nodes")
        return values

    def evaluate(self, x: torch.Tensor) -> torch.Tensor:
        if self.kind is ModulusKind.CONSTANT:
            return torch.full_like(x, self.coefficients[0], dtype=torch.float64)
        if self.kind is ModulusKind.AFFINE:
            a, b = self.coefficients
            return a + b * x
        raise ValueError("A tabulated modulus is evaluated per side, use on_side")

    def on_side(self, trace: Gamma1Trace, s: torch.Tensor) -> torch.Tensor:
        """g at local coordinate s in [0, 1] on every side: (m, len(s))."""
        x0 = trace.x[0:-1:2]
        if self.kind is not ModulusKind.TABULATED:
            return self.evaluate(x0[:, None] + s[None, :] * trace.segment_lengths[:, None])
        nodes = self.table.unfold(0, 3, 2)  # (m, 3) per side
        return quadratic_on_side(nodes, s)

    def sup(self, trace: Gamma1Trace) -> float:
        if self.kind is ModulusKind.TABULATED:
            return float(self.table.max())
        # affine and constant moduli attain their sup at an endpoint
        return float(self.evaluate(trace.x[[0, -1]]).max())


def quadratic_on_side(nodes: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """Quadratic through (0, e0), (1/2, em), (1, e1): nodes (..., 3), s (q,) -> (..., q)."""
    e0, em, e1 = nodes[..., 0:1], nodes[..., 1:2], nodes[..., 2:3]
    return e0 * (1 - s) * (1 - 2 * s) + 4 * em * s * (1 - s) + e1 * s * (2 * s - 1)


def _side_values(eta: BoundaryTrace) -> torch.Tensor:
    return eta.values.unfold(-1, 3, 2)  # (..., m, 3)


def lambda_inner(
    a: BoundaryTrace, b: BoundaryTrace, g: FrictionModulus, trace: Gamma1Trace
) -> torch.Tensor:
    w = trace.weights * g.nodal(trace)
    return (w * a.values * b.values).sum(-1)


def lambda_norm(a: BoundaryTrace, g: FrictionModulus, trace: Gamma1Trace) -> torch.Tensor:
    return lambda_inner(a, a, g, trace).sqrt()


def j_h(eta: BoundaryTrace, g: FrictionModulus, trace: Gamma1Trace) -> torch.Tensor:
    w = trace.weights * g.nodal(trace)
    return (w * eta.values.abs()).sum(-1)


def integral(eta: BoundaryTrace, trace: Gamma1Trace) -> torch.Tensor:
    """int_Gamma1 eta ds; Simpson is exact on the quadratic pieces."""
    return (trace.weights * eta.values).sum(-1)


def sgn(x: torch.Tensor) -> torch.Tensor:
    return torch.sign(x)


def project_tilde(mu: BoundaryTrace) -> BoundaryTrace:
    return BoundaryTrace(mu.values.clamp(-1.0, 1.0))


def _roots_in_unit_interval(e0: float, em: float, e1: float) -> List[float]:
    # eta(s) = c0 + c1 s + c2 s^2 on the side
    c0, c1, c2 = e0, -3 * e0 + 4 * em - e1, 2 * e0 - 4 * em + 2 * e1
    scale = max(abs(c0), abs(c1), abs(c2))
    if scale == 0:
        return []
    roots = []
    if abs(c2) <= 1e-14 * scale:
        if c1 != 0:
            roots.append(-c0 / c1)
    else:
        disc = c1 * c1 - 4 * c2 * c0
        if disc >= 0:
            q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
            if q != 0:
                roots += [q / c2, c0 / q]
            else:
                roots.append(0.0)
    return sorted(r for r in roots if 0 < r < 1)


def j_exact(
    eta: BoundaryTrace,
    g: FrictionModulus,
    trace: Gamma1Trace,
    quad_points_per_side: int = MIN_EXACT_POINTS,
) -> float:
    """int_Gamma1 g |eta| ds by composite Gauss, split at the sign changes of eta."""
    if quad_points_per_side < MIN_EXACT_POINTS:
        raise ValueError(
            f"Need at least {MIN_EXACT_POINTS} points per side, got {quad_points_per_side}"
        )
    nodes, weights = gauss_legendre(quad_points_per_side)
    sides = _side_values(eta)
    total = 0.0
    for i in range(trace.m):
        e0, em, e1 = (float(v) for v in sides[i])
        breaks = [0.0] + _roots_in_unit_interval(e0, em, e1) + [1.0]
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            s = lo + (hi - lo) * nodes
            integrand = quadratic_on_side(sides[i], s).abs() * g.on_side(trace, s)[i]
            total += float((integrand * weights).sum()) * (hi - lo) * float(trace.segment_lengths[i])
    return total


def l2_norm_exact(
    eta: BoundaryTrace, trace: Gamma1Trace, quad_points_per_side: int = 4
) -> torch.Tensor:
    """||eta||_{L2(Gamma1)}; eta^2 is quartic per side so 3 or more points are exact."""
    nodes, weights = gauss_legendre(quad_points_per_side)
    vals = quadratic_on_side(_side_values(eta), nodes)  # (..., m, q)
    per_side = (vals**2 * weights).sum(-1) * trace.segment_lengths
    return per_side.sum(-1).sqrt()


def mean_zero_basis(trace: Gamma1Trace) -> BoundaryTrace:
    """Batch of 2m-2 traces spanning {eta in Lambda_h : int eta ds = 0}."""
    w = trace.weights[1:-1]
    n = w.shape[0]
    basis = torch.zeros(n - 1, n, dtype=torch.float64)
    k = torch.arange(1, n)
    basis[k - 1, k] = 1.0
    basis[:, 0] = -w[1:] / w[0]
    return BoundaryTrace.from_interior(basis)
