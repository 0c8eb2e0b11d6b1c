import itertools
import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from stokes_friction.modules.mesh import Gamma1Trace, build_friedrichs_keller, extract_gamma1_trace
from stokes_friction.ops.friction_boundary import (
    BoundaryTrace,
    FrictionModulus,
    integral,
    j_exact,
    j_h,
    l2_norm_exact,
    lambda_inner,
    lambda_norm,
    mean_zero_basis,
    project_tilde,
    quadratic_on_side,
    sgn,
)
from stokes_friction.ops.quadrature import gauss_legendre


def _trace(n):
    return extract_gamma1_trace(build_friedrichs_keller(n))


def _unit_side():
    return Gamma1Trace(
        x=torch.tensor([0.0, 0.5, 1.0], dtype=torch.float64),
        p2_nodes=torch.arange(3),
        is_vertex=torch.tensor([True, False, True]),
        segment_lengths=torch.tensor([1.0], dtype=torch.float64),
    )


def _interior_values(m):
    return st.lists(
        st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False),
        min_size=2 * m - 1,
        max_size=2 * m - 1,
    )


MODULI = [
    FrictionModulus.constant(1.0),
    FrictionModulus.constant(0.3),
    FrictionModulus.affine(0.5, 1.5),
]


def test_trace_endpoints_must_vanish():
    with pytest.raises(ValueError):
        BoundaryTrace(torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64))
    with pytest.raises(ValueError):
        BoundaryTrace(torch.tensor([0.0, 0.0], dtype=torch.float64))
    eta = BoundaryTrace.from_interior(torch.tensor([1.0, 2.0, 3.0]))
    assert eta.values.tolist() == [0.0, 1.0, 2.0, 3.0, 0.0]
    assert eta.values.dtype == torch.float64
    assert (2 * eta - eta).values.tolist() == eta.values.tolist()
    assert (-eta).interior.tolist() == [-1.0, -2.0, -3.0]


def test_lambda_inner_example():
    trace = _trace(2)
    ones = BoundaryTrace.constant(trace, 1.0)
    g = FrictionModulus.constant(1.0)
    assert lambda_inner(ones, ones, g, trace).item() == pytest.approx(5 / 6, abs=1e-15)
    assert lambda_inner(BoundaryTrace.zeros(trace), ones, g, trace).item() == 0.0


def test_j_h_example():
    trace = _trace(2)
    eta = BoundaryTrace.from_interior(torch.tensor([-1.0, 1.0, -1.0]))
    g = FrictionModulus.constant(1.0)
    assert j_h(eta, g, trace).item() == pytest.approx(5 / 6, abs=1e-15)
    assert j_h(BoundaryTrace.zeros(trace), g, trace).item() == 0.0


@pytest.mark.parametrize("g", MODULI)
def test_j_h_homogeneous_and_subadditive(g):
    trace = _trace(5)
    torch.random.manual_seed(0)
    for _ in range(20):
        a = BoundaryTrace.from_interior(torch.randn(trace.n_nodes - 2))
        b = BoundaryTrace.from_interior(torch.randn(trace.n_nodes - 2))
        assert j_h(3 * a, g, trace).item() == pytest.approx(3 * j_h(a, g, trace).item(), rel=1e-14)
        assert j_h(-a, g, trace).item() == pytest.approx(j_h(a, g, trace).item(), rel=1e-14)
        assert j_h(a + b, g, trace).item() <= j_h(a, g, trace).item() + j_h(b, g, trace).item() + 1e-14


def test_j_exact_single_side():
    trace = _unit_side()
    eta = BoundaryTrace(torch.tensor([0.0, 0.25, 0.0], dtype=torch.float64))  # s (1 - s)
    assert j_exact(eta, FrictionModulus.constant(1.0), trace) == pytest.approx(1 / 6, abs=1e-12)
    assert j_exact(BoundaryTrace.zeros(trace), FrictionModulus.constant(1.0), trace) == 0.0


def test_j_exact_needs_enough_points():
    trace = _trace(2)
    with pytest.raises(ValueError):
        j_exact(BoundaryTrace.zeros(trace), FrictionModulus.constant(1.0), trace, quad_points_per_side=16)


@pytest.mark.parametrize("g", MODULI)
@pytest.mark.parametrize("n", [2, 7])
def test_simpson_exact_for_sign_constant_traces(n, g):
    trace = _trace(n)
    torch.random.manual_seed(0)
    for _ in range(10):
        vertex = torch.rand(n + 1, dtype=torch.float64)
        vertex[0] = vertex[-1] = 0
        values = torch.zeros(2 * n + 1, dtype=torch.float64)
        values[0::2] = vertex
        # a midpoint above the chord keeps the side quadratic nonnegative
        values[1::2] = 0.5 * (vertex[1:] + vertex[:-1]) + torch.rand(n, dtype=torch.float64)
        for sign in (1.0, -1.0):
            eta = BoundaryTrace(sign * values)
            diff = abs(j_h(eta, g, trace).item() - j_exact(eta, g, trace))
            assert diff <= 1e-12


def test_j_exact_with_sign_changes():
    trace = _trace(2)
    eta = BoundaryTrace.from_interior(torch.tensor([1.0, -0.5, 0.3], dtype=torch.float64))
    g = FrictionModulus.affine(1.0, 0.5)
    # brute-force composite midpoint rule per side
    s = (torch.arange(200000, dtype=torch.float64) + 0.5) / 200000
    sides = eta.values.unfold(-1, 3, 2)
    brute = sum(
        float((quadratic_on_side(sides[i], s).abs() * g.on_side(trace, s)[i]).mean())
        * float(trace.segment_lengths[i])
        for i in range(trace.m)
    )
    exact = j_exact(eta, g, trace)
    print(f"j_exact {exact} brute {brute}")
    assert exact == pytest.approx(brute, abs=1e-8)
    # the lumped functional differs once the trace changes sign inside a side
    assert abs(j_h(eta, g, trace).item() - exact) > 1e-6


def test_integral_exact_for_quadratics():
    trace = _trace(3)
    torch.random.manual_seed(0)
    eta = BoundaryTrace.from_interior(torch.randn(trace.n_nodes - 2))
    nodes, weights = gauss_legendre(4)
    sides = quadratic_on_side(eta.values.unfold(-1, 3, 2), nodes)
    exact = float(((sides * weights).sum(-1) * trace.segment_lengths).sum())
    assert integral(eta, trace).item() == pytest.approx(exact, abs=1e-14)


def test_lambda_inner_positive_definite_and_symmetric():
    trace = _trace(4)
    g = FrictionModulus.affine(0.2, 2.0)
    torch.random.manual_seed(0)
    a = BoundaryTrace.from_interior(torch.randn(16, trace.n_nodes - 2))
    b = BoundaryTrace.from_interior(torch.randn(16, trace.n_nodes - 2))
    assert bool((lambda_inner(a, a, g, trace) > 0).all())
    assert torch.allclose(lambda_inner(a, b, g, trace), lambda_inner(b, a, g, trace))
    bound = lambda_norm(a, g, trace) * lambda_norm(b, g, trace)
    assert bool((lambda_inner(a, b, g, trace).abs() <= bound + 1e-14).all())


def test_project_tilde_example():
    mu = BoundaryTrace.from_interior(torch.tensor([1.5, -0.3, -2.0], dtype=torch.float64))
    assert project_tilde(mu).interior.tolist() == [1.0, -0.3, -1.0]
    inside = BoundaryTrace.from_interior(torch.tensor([0.5, -1.0, 1.0]))
    assert torch.equal(project_tilde(inside).values, inside.values)
    assert torch.equal(project_tilde(project_tilde(mu)).values, project_tilde(mu).values)


def test_sign_of_zero_is_zero():
    assert sgn(torch.tensor([-2.0, 0.0, 3.0])).tolist() == [-1.0, 0.0, 1.0]


@settings(max_examples=1000, deadline=None)
@given(mu=_interior_values(3), nu=_interior_values(3))
def test_projection_nonexpansive(mu, nu):
    trace = _trace(3)
    g = FrictionModulus.affine(0.5, 1.0)
    a = BoundaryTrace.from_interior(torch.tensor(mu, dtype=torch.float64))
    b = BoundaryTrace.from_interior(torch.tensor(nu, dtype=torch.float64))
    lhs = lambda_norm(project_tilde(a) - project_tilde(b), g, trace).item()
    assert lhs <= lambda_norm(a - b, g, trace).item() + 1e-12


@settings(max_examples=200, deadline=None)
@given(eta=_interior_values(3), lam=_interior_values(3))
def test_inner_product_below_friction_functional(eta, lam):
    trace = _trace(3)
    g = FrictionModulus.affine(0.5, 1.0)
    e = BoundaryTrace.from_interior(torch.tensor(eta, dtype=torch.float64))
    clipped = project_tilde(BoundaryTrace.from_interior(torch.tensor(lam, dtype=torch.float64)))
    assert lambda_inner(e, clipped, g, trace).item() <= j_h(e, g, trace).item() + 1e-12


@pytest.mark.parametrize("g", MODULI)
@pytest.mark.parametrize("n", [2, 3])
def test_box_characterized_by_one_hot_traces(n, g):
    trace = _trace(n)
    n_interior = trace.n_nodes - 2
    directions = []
    for k, sign in itertools.product(range(n_interior), (1.0, -1.0)):
        v = torch.zeros(n_interior, dtype=torch.float64)
        v[k] = sign
        directions.append(BoundaryTrace.from_interior(v))
    torch.random.manual_seed(0)
    for _ in range(200):
        lam = BoundaryTrace.from_interior(4 * torch.rand(n_interior, dtype=torch.float64) - 2)
        in_box = bool((lam.interior.abs() <= 1).all())
        passes = all(
            lambda_inner(p, lam, g, trace).item() <= j_h(p, g, trace).item() for p in directions
        )
        assert in_box == passes


@pytest.mark.parametrize("g", MODULI)
@pytest.mark.parametrize("n", [2, 5, 10])
def test_friction_bounded_by_l2_norm(n, g):
    trace = _trace(n)
    constant = math.sqrt(5 / 2) * g.sup(trace)
    torch.random.manual_seed(0)
    eta = BoundaryTrace.from_interior(torch.randn(1000, trace.n_nodes - 2, dtype=torch.float64))
    ratio = j_h(eta, g, trace) / l2_norm_exact(eta, trace)
    print(f"max ratio {ratio.max().item()} bound {constant}")
    assert bool((ratio <= constant).all())


@pytest.mark.parametrize("g", MODULI)
@pytest.mark.parametrize("n", [2, 3])
def test_constant_stress_annihilates_mean_zero_traces(n, g):
    trace = _trace(n)
    basis = mean_zero_basis(trace)
    assert basis.values.shape == (2 * n - 2, 2 * n + 1)
    assert torch.linalg.matrix_rank(basis.interior).item() == 2 * n - 2
    assert integral(basis, trace).abs().max().item() < 1e-14
    delta = 0.7
    nodal = g.nodal(trace)
    lam = BoundaryTrace.from_interior(delta / nodal[1:-1])
    assert lambda_inner(basis, lam, g, trace).abs().max().item() < 1e-12


def test_modulus_validation():
    trace = _trace(2)
    with pytest.raises(ValueError):
        FrictionModulus.affine(-0.5, 1.0).nodal(trace)
    with pytest.raises(ValueError):
        FrictionModulus.tabulated(torch.ones(4)).nodal(trace)
    with pytest.raises(ValueError):
        FrictionModulus.tabulated(torch.ones(5)).evaluate(trace.x)
    relaxed = FrictionModulus.affine(-0.5, 1.0).nodal(trace, strict=False)
    assert relaxed[0].item() == -0.5


def test_modulus_sup_and_sides():
    trace = _trace(2)
    assert FrictionModulus.affine(2.0, -1.0).sup(trace) == 2.0
    assert FrictionModulus.constant(0.8).sup(trace) == 0.8
    table = torch.tensor([1.0, 2.0, 3.0, 2.0, 1.0])
    tab = FrictionModulus.tabulated(table)
    assert tab.sup(trace) == 3.0
    s = torch.tensor([0.0, 0.5, 1.0], dtype=torch.float64)
    assert torch.allclose(tab.on_side(trace, s), table.to(torch.float64).unfold(0, 3, 2))
    affine = FrictionModulus.affine(1.0, 2.0)
    x = torch.tensor([[0.0, 0.25, 0.5], [0.5, 0.75, 1.0]], dtype=torch.float64)
    assert torch.allclose(affine.on_side(trace, s), 1.0 + 2.0 * x)
