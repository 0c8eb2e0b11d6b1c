# Uniform Friedrichs-Keller triangulation of the unit square. The top side y = 1 is the
# friction boundary Gamma1; the other three sides form the adhesive boundary Gamma0.

import logging
from dataclasses import dataclass
from typing import Tuple

import torch
from einops import rearrange

logger = logging.getLogger(__name__)

GAMMA0 = 0
GAMMA1 = 1

# local edge (a, b) of every triangle; the P2 midpoint slots follow this order
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Vertex (i, j) sits at (i/N, j/N) with index j (N+1) + i. Cell (i, j) is cut along
    its lower-left to upper-right diagonal into the counterclockwise triangles
    2 (jN + i) = (v00, v10, v11) and 2 (jN + i) + 1 = (v00, v11, v01).

    The P2 node grid has (2N+1)^2 nodes at (I/2N, J/2N) with index J (2N+1) + I; its
    even-even nodes are the vertices and the rest are edge midpoints.
    """

    n: int
    vertices: torch.Tensor  # (nv, 2)
    triangles: torch.Tensor  # (nt, 3)
    edges: torch.Tensor  # (ne, 2), sorted vertex pairs
    edge_midpoints: torch.Tensor  # (ne, 2)
    boundary_edges: torch.Tensor  # (nb,) indices into edges
    boundary_tags: torch.Tensor  # (nb,) GAMMA0 or GAMMA1
    p2_nodes: torch.Tensor  # (np2, 2)
    p2_triangles: torch.Tensor  # (nt, 6)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_p2_nodes(self) -> int:
        return self.p2_nodes.shape[0]

    def signed_areas(self) -> torch.Tensor:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def on_boundary(self, points: torch.Tensor) -> torch.Tensor:
        x, y = points[..., 0], points[..., 1]
        return (x == 0) | (x == 1) | (y == 0) | (y == 1)

    def boundary_only_triangles(self) -> torch.Tensor:
        """Triangles whose three vertices all lie on the boundary."""
        flags = self.on_boundary(self.vertices)[self.triangles]
        return torch.nonzero(flags.all(dim=-1)).flatten()

    def locate(self, points: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Triangle index (...,) and barycentric coordinates (..., 3) of points in the square.

        Points on a shared edge go to the triangle with the smaller index in its cell.
        """
        n = self.n
        scaled = points * n
        cell = scaled.floor().clamp(0, n - 1)
        local = scaled - cell
        s, t = local[..., 0], local[..., 1]
        i, j = cell[..., 0].long(), cell[..., 1].long()
        upper = t > s
        tri = 2 * (j * n + i) + upper.long()
        # lower (v00, v10, v11): (1-s, s-t, t); upper (v00, v11, v01): (1-t, s, t-s)
        bary_lower = torch.stack([1 - s, s - t, t], dim=-1)
        bary_upper = torch.stack([1 - t, s, t - s], dim=-1)
        bary = torch.where(upper[..., None], bary_upper, bary_lower)
        return tri, bary

    def validate(self) -> None:
        n = self.n
        if self.n_vertices != (n + 1) ** 2:
            raise ValueError(f"Expected {(n + 1) ** 2} vertices, got {self.n_vertices}")
        if self.n_triangles != 2 * n * n:
            raise ValueError(f"Expected {2 * n * n} triangles, got {self.n_triangles}")
        if self.n_edges != 3 * n * n + 2 * n:
            raise ValueError(f"Expected {3 * n * n + 2 * n} edges, got {self.n_edges}")
        if not bool((self.signed_areas() > 0).all()):
            raise ValueError("Triangles must be counterclockwise with positive area")
        # the two corner triangles at (1, 0) and (0, 1) are the only ones allowed to have
        # no interior vertex
        allowed = {2 * (n - 1), 2 * (n - 1) * n + 1}
        found = set(self.boundary_only_triangles().tolist())
        if not found <= allowed:
            raise ValueError(f"Triangles without an interior vertex: {sorted(found - allowed)}")


@dataclass(frozen=True, eq=False)
class Gamma1Trace:
    """Ordered node chain M_1, M_{3/2}, ..., M_{m+1} along y = 1 with ascending x."""

    x: torch.Tensor  # (2m+1,)
    p2_nodes: torch.Tensor  # (2m+1,) ids into mesh.p2_nodes
    is_vertex: torch.Tensor  # (2m+1,) bool
    segment_lengths: torch.Tensor  # (m,)

    @property
    def m(self) -> int:
        return self.segment_lengths.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def interior(self) -> torch.Tensor:
        mask = torch.ones(self.n_nodes, dtype=torch.bool)
        mask[0] = mask[-1] = False
        return mask

    @property
    def weights(self) -> torch.Tensor:
        """Simpson weights: (|e_{i-1}| + |e_i|)/6 at vertices, 4|e_i|/6 at midpoints."""
        w = torch.zeros(self.n_nodes, dtype=torch.float64)
        start = 2 * torch.arange(self.m)
        L = self.segment_lengths
        w.index_add_(0, start, L / 6)
        w.index_add_(0, start + 1, 4 * L / 6)
        w.index_add_(0, start + 2, L / 6)
        return w


def build_friedrichs_keller(n: int) -> Mesh:
    if n < 2:
        raise ValueError(f"Mesh needs N >= 2 divisions per side, got N={n}")
    ticks = torch.arange(n + 1, dtype=torch.float64) / n
    ys, xs = torch.meshgrid(ticks, ticks, indexing="ij")
    vertices = torch.stack([xs.reshape(-1), ys.reshape(-1)], dim=-1)

    idx = torch.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i]
    v00, v10 = idx[:-1, :-1].reshape(-1), idx[:-1, 1:].reshape(-1)
    v11, v01 = idx[1:, 1:].reshape(-1), idx[1:, :-1].reshape(-1)
    lower = torch.stack([v00, v10, v11], dim=-1)
    upper = torch.stack([v00, v11, v01], dim=-1)
    triangles = rearrange(torch.stack([lower, upper], dim=1), "c t k -> (c t) k")

    pairs = torch.cat([triangles[:, list(e)] for e in LOCAL_EDGES], dim=0)
    edges = torch.unique(pairs.sort(dim=-1).values, dim=0)
    ends = vertices[edges]  # (ne, 2, 2)
    edge_midpoints = ends.mean(dim=1)
    same_side = ((ends[:, 0] == ends[:, 1]) & ((ends[:, 0] == 0) | (ends[:, 0] == 1))).any(-1)
    boundary_edges = torch.nonzero(same_side).flatten()
    top = (ends[boundary_edges, :, 1] == 1).all(dim=-1)
    boundary_tags = torch.full_like(boundary_edges, GAMMA0)
    boundary_tags[top] = GAMMA1

    fine = torch.arange(2 * n + 1, dtype=torch.float64) / (2 * n)
    fy, fx = torch.meshgrid(fine, fine, indexing="ij")
    p2_nodes = torch.stack([fx.reshape(-1), fy.reshape(-1)], dim=-1)
    I, J = 2 * (triangles % (n + 1)), 2 * (triangles // (n + 1))
    Im = torch.stack([(I[:, a] + I[:, b]) // 2 for a, b in LOCAL_EDGES], dim=-1)
    Jm = torch.stack([(J[:, a] + J[:, b]) // 2 for a, b in LOCAL_EDGES], dim=-1)
    p2_triangles = torch.cat([J * (2 * n + 1) + I, Jm * (2 * n + 1) + Im], dim=-1)

    mesh = Mesh(
        n=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_midpoints=edge_midpoints,
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
        p2_nodes=p2_nodes,
        p2_triangles=p2_triangles,
    )
    mesh.validate()
    logger.debug("Built %dx%d Friedrichs-Keller mesh with %d triangles", n, n, mesh.n_triangles)
    return mesh


def extract_gamma1_trace(mesh: Mesh) -> Gamma1Trace:
    n = mesh.n
    row = 2 * n * (2 * n + 1)  # first P2 node on y = 1
    p2_nodes = row + torch.arange(2 * n + 1)
    x = mesh.p2_nodes[p2_nodes, 0]
    is_vertex = torch.arange(2 * n + 1) % 2 == 0
    vx = x[is_vertex]
    return Gamma1Trace(
        x=x, p2_nodes=p2_nodes, is_vertex=is_vertex, segment_lengths=vx[1:] - vx[:-1]
    )


def mesh_size(mesh: Mesh) -> float:
    p = mesh.vertices[mesh.triangles]
    sides = torch.stack([p[:, b] - p[:, a] for a, b in LOCAL_EDGES], dim=1)
    return float(sides.norm(dim=-1).max())
