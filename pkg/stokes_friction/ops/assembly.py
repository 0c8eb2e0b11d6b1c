# Element-level assembly of the P2/P1 forms on the Friedrichs-Keller mesh.
#
# Local velocity dofs are ordered (node k, component c) -> 2k + c over the six P2 nodes;
# every element quantity is evaluated in one batched einsum over (triangles, points).

from dataclasses import dataclass
from functools import lru_cache

import torch
from einops import rearrange, repeat

from stokes_friction.models.manufactured import ManufacturedCase
from stokes_friction.modules.mesh import Gamma1Trace, Mesh
from stokes_friction.modules.spaces import DofMap
from stokes_friction.ops.friction_boundary import FrictionModulus
from stokes_friction.ops.quadrature import p1_basis, p2_basis, p2_basis_grad_bary, triangle_rule
from stokes_friction.ops.sparse import SparseOperator


@dataclass(frozen=True, eq=False)
class ElementGeometry:

    areas: torch.Tensor  # (nt,)
    grad_bary: torch.Tensor  # (nt, 3, 2)
    points: torch.Tensor  # (nt, nq, 2)
    weights: torch.Tensor  # (nt, nq), area included
    p2: torch.Tensor  # (nq, 6)
    p2_grad: torch.Tensor  # (nt, nq, 6, 2)
    p1: torch.Tensor  # (nq, 3)


def barycentric_gradients(corners: torch.Tensor) -> torch.Tensor:
    """grad(l_a) for triangles with corners (..., 3, 2) -> (..., 3, 2)."""
    x, y = corners[..., 0], corners[..., 1]
    area2 = (x[..., 1] - x[..., 0]) * (y[..., 2] - y[..., 0]) - (
        x[..., 2] - x[..., 0]
    ) * (y[..., 1] - y[..., 0])
    # grad(l_a) is the inward normal of the opposite side over twice the area
    gx = torch.stack([y[..., 1] - y[..., 2], y[..., 2] - y[..., 0], y[..., 0] - y[..., 1]], -1)
    gy = torch.stack([x[..., 2] - x[..., 1], x[..., 0] - x[..., 2], x[..., 1] - x[..., 0]], -1)
    return torch.stack([gx, gy], dim=-1) / area2[..., None, None]


@lru_cache(maxsize=16)
def element_geometry(mesh: Mesh) -> ElementGeometry:
    bary, w = triangle_rule()
    corners = mesh.vertices[mesh.triangles]
    areas = mesh.signed_areas()
    grad_bary = barycentric_gradients(corners)
    points = torch.einsum("qa,tad->tqd", bary, corners)
    p2_grad = torch.einsum("qka,tad->tqkd", p2_basis_grad_bary(bary), grad_bary)
    return ElementGeometry(
        areas=areas,
        grad_bary=grad_bary,
        points=points,
        weights=areas[:, None] * w[None, :],
        p2=p2_basis(bary),
        p2_grad=p2_grad,
        p1=p1_basis(bary),
    )


def local_velocity_dofs(mesh: Mesh) -> torch.Tensor:
    """(nt, 12) raw velocity dofs in local (node, component) order."""
    comp = torch.arange(2)
    return rearrange(2 * mesh.p2_triangles[:, :, None] + comp, "t k c -> t (k c)")


def _scatter(local: torch.Tensor, row_dofs: torch.Tensor, col_dofs: torch.Tensor, shape):
    rows = repeat(row_dofs, "t i -> t i j", j=col_dofs.shape[-1])
    cols = repeat(col_dofs, "t j -> t i j", i=row_dofs.shape[-1])
    return SparseOperator.from_triplets(rows, cols, local, shape)


def element_stiffness(mesh: Mesh, nu: float) -> torch.Tensor:
    """(nt, 12, 12) blocks of a(u, v) = 2 nu sum_ij int e_ij(u) e_ij(v).

    With c, d components: nu int [delta_cd grad(phi_k).grad(phi_l) + d_d phi_k d_c phi_l].
    """
    geo = element_geometry(mesh)
    lap = torch.einsum("tq,tqkd,tqld->tkl", geo.weights, geo.p2_grad, geo.p2_grad)
    cross = torch.einsum("tq,tqkd,tqlc->tkcld", geo.weights, geo.p2_grad, geo.p2_grad)
    eye = torch.eye(2, dtype=torch.float64)
    local = nu * (torch.einsum("tkl,cd->tkcld", lap, eye) + cross)
    return rearrange(local, "t k c l d -> t (k c) (l d)")


def assemble_a_full(mesh: Mesh, nu: float) -> SparseOperator:
    dofs = local_velocity_dofs(mesh)
    n_raw = 2 * mesh.n_p2_nodes
    return _scatter(element_stiffness(mesh, nu), dofs, dofs, (n_raw, n_raw))


def assemble_a(mesh: Mesh, dofmap: DofMap, nu: float) -> SparseOperator:
    if not nu > 0:
        raise ValueError(f"Viscosity must be positive, got nu={nu}")
    full = assemble_a_full(mesh, nu)
    return full.restrict(dofmap.raw_to_free, dofmap.raw_to_free)


def assemble_b_full(mesh: Mesh) -> SparseOperator:
    """b(v, q) = -int div(v) q on all raw velocity dofs, shape (n_vertices, n_raw)."""
    geo = element_geometry(mesh)
    local = -torch.einsum("tq,qi,tqkc->tikc", geo.weights, geo.p1, geo.p2_grad)
    local = rearrange(local, "t i k c -> t i (k c)")
    shape = (mesh.n_vertices, 2 * mesh.n_p2_nodes)
    return _scatter(local, mesh.triangles, local_velocity_dofs(mesh), shape)


def assemble_b(mesh: Mesh, dofmap: DofMap) -> SparseOperator:
    full = assemble_b_full(mesh)
    return full.restrict(None, dofmap.raw_to_free)


def assemble_load_full(mesh: Mesh, case: ManufacturedCase) -> torch.Tensor:
    geo = element_geometry(mesh)
    force = case.body_force(geo.points)  # (nt, nq, 2)
    local = torch.einsum("tq,qk,tqc->tkc", geo.weights, geo.p2, force)
    load = torch.zeros(2 * mesh.n_p2_nodes, dtype=torch.float64)
    return load.index_add_(0, local_velocity_dofs(mesh).reshape(-1), local.reshape(-1))


def assemble_load(mesh: Mesh, dofmap: DofMap, case: ManufacturedCase) -> torch.Tensor:
    return dofmap.restrict(assemble_load_full(mesh, case))


def assemble_h1_gram_full(mesh: Mesh) -> SparseOperator:
    geo = element_geometry(mesh)
    mass = torch.einsum("tq,qk,ql->tkl", geo.weights, geo.p2, geo.p2)
    lap = torch.einsum("tq,tqkd,tqld->tkl", geo.weights, geo.p2_grad, geo.p2_grad)
    eye = torch.eye(2, dtype=torch.float64)
    local = rearrange(
        torch.einsum("tkl,cd->tkcld", mass + lap, eye), "t k c l d -> t (k c) (l d)"
    )
    dofs = local_velocity_dofs(mesh)
    n_raw = 2 * mesh.n_p2_nodes
    return _scatter(local, dofs, dofs, (n_raw, n_raw))


def assemble_h1_gram(mesh: Mesh, dofmap: DofMap) -> SparseOperator:
    return assemble_h1_gram_full(mesh).restrict(dofmap.raw_to_free, dofmap.raw_to_free)


def assemble_pressure_mass(mesh: Mesh) -> SparseOperator:
    geo = element_geometry(mesh)
    local = torch.einsum("tq,qi,qj->tij", geo.weights, geo.p1, geo.p1)
    shape = (mesh.n_vertices, mesh.n_vertices)
    return _scatter(local, mesh.triangles, mesh.triangles, shape)


def pressure_integrals(mesh: Mesh) -> torch.Tensor:
    """int psi_q over the domain for every P1 basis function."""
    geo = element_geometry(mesh)
    local = torch.einsum("tq,qi->ti", geo.weights, geo.p1)
    out = torch.zeros(mesh.n_vertices, dtype=torch.float64)
    return out.index_add_(0, mesh.triangles.reshape(-1), local.reshape(-1))


def assemble_trace_coupling(
    trace: Gamma1Trace, dofmap: DofMap, g: FrictionModulus
) -> SparseOperator:
    """C[j, k] = (trace of phi_k, psi_j) in the Simpson-lumped g-weighted product.

    Row j is the interior trace node j; its only entry sits on that node's traced dof.
    """
    weights = (trace.weights * g.nodal(trace, strict=False))[1:-1]
    rows = torch.arange(dofmap.n_multiplier)
    shape = (dofmap.n_multiplier, dofmap.n_free_velocity)
    return SparseOperator.from_triplets(rows, dofmap.trace_dofs, weights, shape)
