import math

import pytest
import torch

from stokes_friction.modules.mesh import (
    GAMMA0,
    GAMMA1,
    build_friedrichs_keller,
    extract_gamma1_trace,
    mesh_size,
)
from stokes_friction.utils.io import write_mesh_dump


@pytest.mark.parametrize("n", [2, 3, 5, 10, 17, 40, 128])
def test_counts_and_areas(n):
    mesh = build_friedrichs_keller(n)
    assert mesh.n_vertices == (n + 1) ** 2
    assert mesh.n_triangles == 2 * n * n
    assert mesh.n_edges == 3 * n * n + 2 * n
    assert mesh.n_p2_nodes == (2 * n + 1) ** 2
    areas = mesh.signed_areas()
    assert torch.allclose(areas, torch.full_like(areas, 1 / (2 * n * n)), rtol=1e-12, atol=0)


def test_n10_example():
    mesh = build_friedrichs_keller(10)
    assert (mesh.n_vertices, mesh.n_triangles, mesh.n_edges) == (121, 200, 320)


def test_n2_example():
    mesh = build_friedrichs_keller(2)
    assert (mesh.n_vertices, mesh.n_triangles, mesh.n_edges) == (9, 8, 16)


@pytest.mark.parametrize("n", [1, 0, -3])
def test_rejects_small_n(n):
    with pytest.raises(ValueError):
        build_friedrichs_keller(n)


@pytest.mark.parametrize("n", [4, 7])
def test_minimum_angle_is_45_degrees(n):
    mesh = build_friedrichs_keller(n)
    p = mesh.vertices[mesh.triangles]
    angles = []
    for a in range(3):
        u = p[:, (a + 1) % 3] - p[:, a]
        v = p[:, (a + 2) % 3] - p[:, a]
        cos = (u * v).sum(-1) / (u.norm(dim=-1) * v.norm(dim=-1))
        angles.append(torch.rad2deg(torch.acos(cos)))
    angles = torch.stack(angles, dim=-1)
    assert abs(float(angles.min()) - 45.0) < 1e-9
    assert torch.allclose(angles.sum(-1), torch.full((mesh.n_triangles,), 180.0, dtype=torch.float64))


@pytest.mark.parametrize("n", [2, 6])
def test_boundary_tags(n):
    mesh = build_friedrichs_keller(n)
    assert mesh.boundary_edges.shape[0] == 4 * n
    ends = mesh.vertices[mesh.edges[mesh.boundary_edges]]
    top = (ends[:, :, 1] == 1).all(dim=-1)
    assert int((mesh.boundary_tags == GAMMA1).sum()) == n
    assert bool((mesh.boundary_tags[top] == GAMMA1).all())
    assert bool((mesh.boundary_tags[~top] == GAMMA0).all())


@pytest.mark.parametrize("n", [2, 5, 12])
def test_only_corner_triangles_lack_an_interior_vertex(n):
    mesh = build_friedrichs_keller(n)
    corner = mesh.boundary_only_triangles().tolist()
    assert corner == [2 * (n - 1), 2 * (n - 1) * n + 1]
    centroids = mesh.vertices[mesh.triangles[corner]].mean(dim=1)
    # bottom-right and top-left corners of the square
    assert bool((centroids[0] > torch.tensor([0.5, 0.0], dtype=torch.float64)).all())
    assert float(centroids[1, 0]) < 0.5 and float(centroids[1, 1]) > 0.5


def test_triangles_meet_in_shared_edges():
    mesh = build_friedrichs_keller(4)
    edges = torch.cat([mesh.triangles[:, [a, b]] for a, b in ((0, 1), (1, 2), (2, 0))])
    edges = edges.sort(dim=-1).values
    _, counts = torch.unique(edges, dim=0, return_counts=True)
    # every interior edge is shared by exactly two triangles, boundary edges by one
    assert int((counts == 1).sum()) == 4 * 4
    assert int(counts.max()) == 2


@pytest.mark.parametrize("n", [2, 10])
def test_p2_connectivity(n):
    mesh = build_friedrichs_keller(n)
    nodes = mesh.p2_nodes[mesh.p2_triangles]  # (nt, 6, 2)
    corners = mesh.vertices[mesh.triangles]
    assert torch.equal(nodes[:, :3], corners)
    for slot, (a, b) in enumerate(((0, 1), (1, 2), (2, 0)), start=3):
        assert torch.allclose(nodes[:, slot], 0.5 * (corners[:, a] + corners[:, b]), atol=1e-15)


def test_gamma1_trace_n2():
    mesh = build_friedrichs_keller(2)
    trace = extract_gamma1_trace(mesh)
    assert trace.x.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert bool((mesh.p2_nodes[trace.p2_nodes, 1] == 1).all())
    assert trace.is_vertex.tolist() == [True, False, True, False, True]
    assert trace.interior.tolist() == [False, True, True, True, False]


@pytest.mark.parametrize("n", [2, 10, 33])
def test_gamma1_trace_invariants(n):
    trace = extract_gamma1_trace(build_friedrichs_keller(n))
    assert trace.n_nodes == 2 * n + 1
    assert int(trace.interior.sum()) == 2 * n - 1
    assert trace.x[0] == 0 and trace.x[-1] == 1
    assert abs(float(trace.segment_lengths.sum()) - 1.0) < 1e-14
    vx = trace.x[trace.is_vertex]
    assert torch.allclose(trace.x[~trace.is_vertex], 0.5 * (vx[1:] + vx[:-1]), atol=1e-16)
    assert abs(float(trace.weights.sum()) - 1.0) < 1e-14


def test_simpson_weights_n2():
    trace = extract_gamma1_trace(build_friedrichs_keller(2))
    expected = torch.tensor([1 / 12, 1 / 3, 1 / 6, 1 / 3, 1 / 12], dtype=torch.float64)
    assert torch.allclose(trace.weights, expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("n", [10, 40])
def test_mesh_size(n):
    assert mesh_size(build_friedrichs_keller(n)) == pytest.approx(math.sqrt(2) / n, rel=1e-14)
    assert mesh_size(build_friedrichs_keller(n)) == pytest.approx(
        2 * mesh_size(build_friedrichs_keller(2 * n)), rel=1e-14
    )


@pytest.mark.parametrize("n, k", [(2, 2), (3, 4), (10, 12)])
def test_nested_vertices(n, k):
    coarse = build_friedrichs_keller(n).vertices
    fine = build_friedrichs_keller(n * k).vertices
    idx = torch.round(coarse * n).long()
    fine_idx = (idx[:, 1] * k) * (n * k + 1) + idx[:, 0] * k
    assert torch.allclose(fine[fine_idx], coarse, rtol=0, atol=1e-15)


def test_locate_recovers_points():
    mesh = build_friedrichs_keller(6)
    torch.random.manual_seed(0)
    points = torch.rand(500, 2, dtype=torch.float64)
    tri, bary = mesh.locate(points)
    assert bool((bary >= -1e-14).all())
    rebuilt = torch.einsum("pa,pad->pd", bary, mesh.vertices[mesh.triangles[tri]])
    assert torch.allclose(rebuilt, points, atol=1e-14)


def test_mesh_dump(tmp_path):
    mesh = build_friedrichs_keller(2)
    path = tmp_path / "mesh.txt"
    write_mesh_dump(mesh, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "# vertices 9"
    assert lines[1] == "0.0 0.0"
    assert lines[10] == "# triangles 8"
    assert lines[11] == "0 1 4"
    assert len(lines) == 1 + 9 + 1 + 8
