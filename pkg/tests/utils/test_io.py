import pytest
import torch
from einops import rearrange

from stokes_friction.models.config_friction import BoundaryCondition
from stokes_friction.models.friction_stokes import FrictionStokesSolver
from stokes_friction.modules.mesh import build_friedrichs_keller
from stokes_friction.utils.analysis import ThresholdRow
from stokes_friction.utils.io import (
    fmt,
    p1_on_p2_nodes,
    read_csv,
    read_vtk_point_data,
    sample_multiplier,
    write_iteration_log,
    write_multiplier_csv,
    write_multiplier_table,
    write_threshold_csv,
    write_vtk,
)


@pytest.fixture(scope="module")
def solution():
    # the leak column of the multiplier table, which converges in a dozen iterations
    return FrictionStokesSolver.from_settings(BoundaryCondition.LBCF, 1.2, n=10, rho=30.0).solve()


def test_fmt():
    assert fmt(0.0) == "0.00000e+00"
    assert fmt(-1.0) == "-1.00000e+00"
    assert fmt(1.23456789e-3) == "1.23457e-03"


def test_vtk_round_trip(tmp_path, solution):
    path = tmp_path / "out" / "field.vtk"
    write_vtk(str(path), solution)
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 2.0"
    assert "DATASET UNSTRUCTURED_GRID" in text
    data = read_vtk_point_data(str(path))
    mesh = solution.mesh
    assert torch.equal(data["points"][:, :2], mesh.p2_nodes)
    velocity = rearrange(solution.velocity_full, "(n c) -> n c", c=2)
    assert torch.equal(data["velocity"][:, :2], velocity)
    assert bool((data["velocity"][:, 2] == 0).all())
    # vertices are the even-even P2 nodes, where the pressure is stored exactly
    vertex_nodes = mesh.p2_triangles[:, :3].reshape(-1)
    assert torch.equal(data["pressure"][vertex_nodes], solution.pressure[mesh.triangles.reshape(-1)])


def test_p1_on_p2_nodes_is_linear():
    mesh = build_friedrichs_keller(3)
    values = 3 * mesh.vertices[:, 0] - mesh.vertices[:, 1]
    expected = 3 * mesh.p2_nodes[:, 0] - mesh.p2_nodes[:, 1]
    assert torch.allclose(p1_on_p2_nodes(mesh, values), expected, atol=1e-15)


def test_multiplier_csv(tmp_path, solution):
    path = tmp_path / "multiplier.csv"
    write_multiplier_csv(solution, str(path))
    rows = read_csv(str(path))
    assert list(rows[0].keys()) == ["x", "lambda"]
    assert len(rows) == 2 * solution.mesh.n + 1
    assert rows[0]["lambda"] == rows[-1]["lambda"] == "0.00000e+00"
    assert float(rows[-1]["x"]) == 1.0


def test_iteration_log(tmp_path, solution):
    path = tmp_path / "log.csv"
    write_iteration_log(solution, str(path))
    rows = read_csv(str(path))
    assert list(rows[0].keys()) == ["k", "increment_h1", "energy_residual", "n_active_nodes"]
    assert [int(r["k"]) for r in rows] == list(range(1, solution.n_iter + 1))
    assert rows[0]["increment_h1"] == "inf"


def test_multiplier_table(tmp_path, solution):
    path = tmp_path / "table.csv"
    write_multiplier_table(["a", "b"], [solution, solution], str(path))
    rows = read_csv(str(path))
    assert list(rows[0].keys()) == ["x", "a", "b"]
    assert len(rows) == 12
    assert rows[0]["x"] == "0.00000e+00" and rows[10]["x"] == "1.00000e+00"
    assert rows[0]["a"] == rows[10]["a"] == "0.00000e+00"
    assert rows[-1] == {"x": "k_itr", "a": str(solution.k_itr), "b": str(solution.k_itr)}
    xs = [k / 10 for k in range(11)]
    assert [float(r["a"]) for r in rows[:-1]] == pytest.approx(sample_multiplier(solution, xs), abs=1e-5)


def test_threshold_csv(tmp_path):
    path = tmp_path / "thresholds.csv"
    write_threshold_csv([ThresholdRow(2.0, 3.0, 1e-9, 7, 0, 0, 0, 29)], str(path))
    rows = read_csv(str(path))
    assert rows == [
        {
            "g": "2.00000e+00",
            "rho": "3.00000e+00",
            "max_trace": "1.00000e-09",
            "n_stick": "7",
            "n_moving": "0",
            "n_positive": "0",
            "n_negative": "0",
            "k_itr": "29",
        }
    ]
