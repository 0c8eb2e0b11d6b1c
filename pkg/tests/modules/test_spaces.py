import pytest
import torch

from stokes_friction.models.config_friction import BoundaryCondition
from stokes_friction.modules.mesh import build_friedrichs_keller
from stokes_friction.modules.spaces import (
    ConstraintClass,
    build_dof_map,
    interpolate_pressure,
    interpolate_velocity,
)


@pytest.mark.parametrize("bc", [BoundaryCondition.SBCF, BoundaryCondition.LBCF])
@pytest.mark.parametrize("n", [2, 5, 10])
def test_dof_counts(n, bc):
    mesh = build_friedrichs_keller(n)
    dofmap = build_dof_map(mesh, bc)
    assert dofmap.n_raw_velocity == 2 * (2 * n + 1) ** 2
    assert dofmap.n_eliminated == 14 * n + 1
    assert dofmap.n_free_velocity == 2 * (2 * n + 1) ** 2 - 14 * n - 1
    assert dofmap.n_multiplier == 2 * n - 1
    assert dofmap.n_pressure == (n + 1) ** 2


def test_n10_free_count():
    dofmap = build_dof_map(build_friedrichs_keller(10), BoundaryCondition.SBCF)
    assert dofmap.n_free_velocity == 741
    assert dofmap.n_multiplier == 19


@pytest.mark.parametrize("bc", [BoundaryCondition.SBCF, BoundaryCondition.LBCF])
def test_eliminated_components(bc):
    mesh = build_friedrichs_keller(4)
    dofmap = build_dof_map(mesh, bc)
    free = dofmap.raw_to_free >= 0
    x, y = mesh.p2_nodes[:, 0], mesh.p2_nodes[:, 1]
    gamma0 = (x == 0) | (x == 1) | (y == 0)
    gamma1 = (y == 1) & ~gamma0
    comp_free = free.reshape(-1, 2)
    assert not bool(comp_free[gamma0].any())
    assert bool(comp_free[~gamma0 & ~gamma1].all())
    # only the traced component survives on the interior of Gamma1
    assert bool(comp_free[gamma1, bc.trace_component].all())
    assert not bool(comp_free[gamma1, bc.pinned_component].any())
    expected = (
        ConstraintClass.NORMAL_PINNED if bc is BoundaryCondition.SBCF else ConstraintClass.TANGENT_PINNED
    )
    assert bool((dofmap.node_class[gamma1] == int(expected)).all())
    assert bool((dofmap.node_class[gamma0] == int(ConstraintClass.PINNED_BOTH)).all())


def test_corners_of_gamma1_are_pinned():
    mesh = build_friedrichs_keller(3)
    dofmap = build_dof_map(mesh, BoundaryCondition.SBCF)
    ends = dofmap.trace.p2_nodes[[0, -1]]
    assert bool((dofmap.node_class[ends] == int(ConstraintClass.PINNED_BOTH)).all())
    assert torch.equal(dofmap.multiplier_nodes, dofmap.trace.p2_nodes[1:-1])


@pytest.mark.parametrize("bc", [BoundaryCondition.SBCF, BoundaryCondition.LBCF])
def test_trace_dofs_point_at_gamma1(bc):
    mesh = build_friedrichs_keller(5)
    dofmap = build_dof_map(mesh, bc)
    raw = dofmap.free_dofs[dofmap.trace_dofs]
    assert bool((raw % 2 == bc.trace_component).all())
    nodes = raw // 2
    assert bool((mesh.p2_nodes[nodes, 1] == 1).all())
    assert bool((mesh.p2_nodes[nodes, 0].diff() > 0).all())


def test_restrict_prolong():
    mesh = build_friedrichs_keller(4)
    dofmap = build_dof_map(mesh, BoundaryCondition.LBCF)
    torch.random.manual_seed(0)
    free = torch.randn(dofmap.n_free_velocity, dtype=torch.float64)
    full = dofmap.prolong(free)
    assert torch.equal(dofmap.restrict(full), free)
    assert bool((full[dofmap.raw_to_free < 0] == 0).all())
    batch = torch.randn(3, dofmap.n_free_velocity, dtype=torch.float64)
    assert torch.equal(dofmap.restrict(dofmap.prolong(batch)), batch)


def test_restrict_prolong_length_mismatch():
    dofmap = build_dof_map(build_friedrichs_keller(2), BoundaryCondition.SBCF)
    with pytest.raises(ValueError):
        dofmap.restrict(torch.zeros(dofmap.n_raw_velocity - 1, dtype=torch.float64))
    with pytest.raises(ValueError):
        dofmap.prolong(torch.zeros(dofmap.n_free_velocity + 1, dtype=torch.float64))


def test_interpolation_layout():
    mesh = build_friedrichs_keller(3)
    u = interpolate_velocity(mesh, lambda p: torch.stack([p[:, 0], 2 * p[:, 1]], dim=-1))
    assert u.shape == (2 * mesh.n_p2_nodes,)
    assert torch.equal(u[0::2], mesh.p2_nodes[:, 0])
    assert torch.equal(u[1::2], 2 * mesh.p2_nodes[:, 1])
    p = interpolate_pressure(mesh, lambda q: q[:, 0] + q[:, 1])
    assert torch.equal(p, mesh.vertices.sum(-1))
