from dataclasses import dataclass
from enum import IntEnum
from typing import Callable

import torch
from einops import rearrange

from stokes_friction.models.config_friction import BoundaryCondition
from stokes_friction.modules.mesh import Gamma1Trace, Mesh, extract_gamma1_trace


class ConstraintClass(IntEnum):
    FREE = 0
    PINNED_BOTH = 1  # Gamma0 nodes and the two corners (0, 1), (1, 1)
    NORMAL_PINNED = 2  # interior Gamma1 nodes under SBCF
    TANGENT_PINNED = 3  # interior Gamma1 nodes under LBCF


@dataclass(frozen=True, eq=False)
class DofMap:
    """
    Raw velocity dofs are interleaved per P2 node: 2 * node + component. Free dofs are
    numbered in raw order after the essential constraints are eliminated. Pressure
    dofs are the mesh vertices; multiplier dofs are the interior Gamma1 trace nodes.
    """

    bc: BoundaryCondition
    trace: Gamma1Trace
    node_class: torch.Tensor  # (np2,) ConstraintClass values
    free_dofs: torch.Tensor  # (n_free,) raw indices, ascending
    raw_to_free: torch.Tensor  # (n_raw,) free index or -1
    n_pressure: int
    trace_dofs: torch.Tensor  # (n_mult,) free indices of the traced component

    @property
    def n_raw_velocity(self) -> int:
        return self.raw_to_free.shape[0]

    @property
    def n_free_velocity(self) -> int:
        return self.free_dofs.shape[0]

    @property
    def n_eliminated(self) -> int:
        return self.n_raw_velocity - self.n_free_velocity

    @property
    def n_multiplier(self) -> int:
        return self.trace_dofs.shape[0]

    @property
    def multiplier_nodes(self) -> torch.Tensor:
        return self.trace.p2_nodes[1:-1]

    def restrict(self, full: torch.Tensor) -> torch.Tensor:
        if full.shape[-1] != self.n_raw_velocity:
            raise ValueError(
                f"Expected {self.n_raw_velocity} raw velocity entries, got {full.shape[-1]}"
            )
        return full[..., self.free_dofs]

    def prolong(self, free: torch.Tensor) -> torch.Tensor:
        if free.shape[-1] != self.n_free_velocity:
            raise ValueError(
                f"Expected {self.n_free_velocity} free velocity entries, got {free.shape[-1]}"
            )
        full = free.new_zeros(*free.shape[:-1], self.n_raw_velocity)
        full[..., self.free_dofs] = free
        return full

    def trace_of(self, free: torch.Tensor) -> torch.Tensor:
        """Interior Gamma1 values of the traced velocity component, ascending x."""
        return free[..., self.trace_dofs]


def build_dof_map(mesh: Mesh, bc: BoundaryCondition) -> DofMap:
    bc = BoundaryCondition(bc)
    x, y = mesh.p2_nodes[:, 0], mesh.p2_nodes[:, 1]
    on_gamma0 = (x == 0) | (x == 1) | (y == 0)
    on_gamma1 = (y == 1) & ~on_gamma0

    node_class = torch.full((mesh.n_p2_nodes,), int(ConstraintClass.FREE), dtype=torch.long)
    node_class[on_gamma0] = int(ConstraintClass.PINNED_BOTH)
    if bc is BoundaryCondition.SBCF:
        node_class[on_gamma1] = int(ConstraintClass.NORMAL_PINNED)
    else:
        node_class[on_gamma1] = int(ConstraintClass.TANGENT_PINNED)

    pinned = torch.zeros(mesh.n_p2_nodes, 2, dtype=torch.bool)
    pinned[on_gamma0] = True
    pinned[on_gamma1, bc.pinned_component] = True
    free_mask = ~rearrange(pinned, "n c -> (n c)")
    free_dofs = torch.nonzero(free_mask).flatten()
    raw_to_free = torch.full((free_mask.shape[0],), -1, dtype=torch.long)
    raw_to_free[free_dofs] = torch.arange(free_dofs.shape[0])

    trace = extract_gamma1_trace(mesh)
    trace_dofs = raw_to_free[2 * trace.p2_nodes[1:-1] + bc.trace_component]
    assert bool((trace_dofs >= 0).all())
    return DofMap(
        bc=bc,
        trace=trace,
        node_class=node_class,
        free_dofs=free_dofs,
        raw_to_free=raw_to_free,
        n_pressure=mesh.n_vertices,
        trace_dofs=trace_dofs,
    )


def interpolate_velocity(
    mesh: Mesh, fn: Callable[[torch.Tensor], torch.Tensor]
) -> torch.Tensor:
    """Quadratic Lagrange interpolant, raw interleaved coefficients."""
    return rearrange(fn(mesh.p2_nodes), "n c -> (n c)")


def interpolate_pressure(mesh: Mesh, fn: Callable[[torch.Tensor], torch.Tensor]) -> torch.Tensor:
    return fn(mesh.vertices)
