# File output: legacy ASCII VTK field dumps, plain-text mesh dumps and CSV tables.
# Every CSV has a header row; numbers use "{:.5e}" (6 significant digits).

import csv
import os
from typing import Dict, Iterable, List, Sequence

import torch
from einops import rearrange

from stokes_friction.modules.mesh import LOCAL_EDGES, Mesh
from stokes_friction.utils.uzawa import DiscreteSolution

VTK_QUADRATIC_TRIANGLE = 22


def fmt(value: float) -> str:
    return "{:.5e}".format(value)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_mesh_dump(mesh: Mesh, path: str) -> None:
    """One "x y" line per vertex, then one "i j k" line per triangle (0-based)."""
    _ensure_parent(path)
    with open(path, "w") as f:
        f.write(f"# vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices.tolist():
            f.write(f"{x!r} {y!r}\n")
        f.write(f"# triangles {mesh.n_triangles}\n")
        for i, j, k in mesh.triangles.tolist():
            f.write(f"{i} {j} {k}\n")


def p1_on_p2_nodes(mesh: Mesh, values: torch.Tensor) -> torch.Tensor:
    """P1 vertex field evaluated at every P2 node (midpoints get the edge average)."""
    out = torch.zeros(mesh.n_p2_nodes, dtype=torch.float64)
    out[mesh.p2_triangles[:, :3]] = values[mesh.triangles]
    for slot, (a, b) in enumerate(LOCAL_EDGES, start=3):
        out[mesh.p2_triangles[:, slot]] = 0.5 * (
            values[mesh.triangles[:, a]] + values[mesh.triangles[:, b]]
        )
    return out


def write_vtk(path: str, sol: DiscreteSolution, title: str = "stokes friction solution") -> None:
    """Quadratic-triangle unstructured grid on the P2 node grid.

    Point data: "velocity" (P2, as 3-vectors with zero z) and "pressure" (P1 interpolant).
    Values carry 17 significant digits so a re-read is bit-exact.
    """
    mesh = sol.mesh
    velocity = rearrange(sol.velocity_full, "(n c) -> n c", c=2)
    pressure = p1_on_p2_nodes(mesh, sol.pressure)
    _ensure_parent(path)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_p2_nodes} double\n")
        for x, y in mesh.p2_nodes.tolist():
            f.write(f"{x:.17g} {y:.17g} 0\n")
        nt = mesh.n_triangles
        f.write(f"CELLS {nt} {7 * nt}\n")
        for cell in mesh.p2_triangles.tolist():
            f.write("6 " + " ".join(str(i) for i in cell) + "\n")
        f.write(f"CELL_TYPES {nt}\n")
        f.write(f"{VTK_QUADRATIC_TRIANGLE}\n" * nt)
        f.write(f"POINT_DATA {mesh.n_p2_nodes}\n")
        f.write("VECTORS velocity double\n")
        for u, v in velocity.tolist():
            f.write(f"{u:.17g} {v:.17g} 0\n")
        f.write("SCALARS pressure double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for p in pressure.tolist():
            f.write(f"{p:.17g}\n")


def read_vtk_point_data(path: str) -> Dict[str, torch.Tensor]:
    """Point coordinates and point-data arrays of a file written by write_vtk."""
    with open(path) as f:
        lines = f.read().split("\n")
    out: Dict[str, torch.Tensor] = {}
    i, n_points = 0, 0

    def take(count, width):
        rows = [[float(v) for v in lines[i + r].split()[:width]] for r in range(count)]
        return torch.tensor(rows, dtype=torch.float64)

    while i < len(lines):
        words = lines[i].split()
        i += 1
        if not words:
            continue
        if words[0] == "POINTS":
            n_points = int(words[1])
            out["points"] = take(n_points, 3)
            i += n_points
        elif words[0] == "VECTORS":
            out[words[1]] = take(n_points, 3)
            i += n_points
        elif words[0] == "SCALARS":
            i += 1  # LOOKUP_TABLE
            out[words[1]] = take(n_points, 1)[:, 0]
            i += n_points
    return out


def _write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_multiplier_csv(sol: DiscreteSolution, path: str) -> None:
    x = sol.dofmap.trace.x.tolist()
    lam = sol.multiplier.values.tolist()
    _write_rows(path, ["x", "lambda"], ([fmt(a), fmt(b)] for a, b in zip(x, lam)))


def write_iteration_log(sol: DiscreteSolution, path: str) -> None:
    rows = (
        [str(r.k), fmt(r.increment_h1), fmt(r.energy_residual), str(r.n_active_nodes)]
        for r in sol.log
    )
    _write_rows(path, ["k", "increment_h1", "energy_residual", "n_active_nodes"], rows)


def sample_multiplier(sol: DiscreteSolution, xs: Sequence[float]) -> List[float]:
    """Multiplier at the Gamma1 vertex nearest to each abscissa."""
    trace = sol.dofmap.trace
    vx = trace.x[trace.is_vertex]
    lam = sol.multiplier.values[trace.is_vertex]
    return [float(lam[(vx - x).abs().argmin()]) for x in xs]


def write_multiplier_table(
    columns: Sequence[str], solutions: Sequence[DiscreteSolution], path: str
) -> None:
    xs = [k / 10 for k in range(11)]
    samples = [sample_multiplier(sol, xs) for sol in solutions]
    rows = [[fmt(x)] + [fmt(s[r]) for s in samples] for r, x in enumerate(xs)]
    rows.append(["k_itr"] + [str(sol.k_itr) for sol in solutions])
    _write_rows(path, ["x"] + list(columns), rows)


def write_convergence_csv(study, path: str) -> None:
    def opt(v):
        return "" if v is None else fmt(v)

    rows = (
        [str(r.n), fmt(r.h), fmt(r.h1_error), opt(r.h1_rate), fmt(r.l2_error), opt(r.l2_rate), str(r.k_itr)]
        for r in study.rows
    )
    header = ["N", "h", "h1_error", "h1_rate", "l2_error", "l2_rate", "k_itr"]
    _write_rows(path, header, rows)


def write_threshold_csv(rows, path: str) -> None:
    header = ["g", "rho", "max_trace", "n_stick", "n_moving", "n_positive", "n_negative", "k_itr"]
    body = (
        [fmt(r.g), fmt(r.rho), fmt(r.max_trace), str(r.n_stick), str(r.n_moving),
         str(r.n_positive), str(r.n_negative), str(r.k_itr)]
        for r in rows
    )
    _write_rows(path, header, body)


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
