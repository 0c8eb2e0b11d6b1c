# Reference-element tables: a symmetric 16-point triangle rule exact through degree 8,
# P1/P2 Lagrange bases in barycentric coordinates, and Gauss-Legendre on [0, 1].

from functools import lru_cache
from typing import Tuple

import numpy as np
import torch

# (weight, a) for the orbits (a, a, 1 - 2a); the centroid orbit has a = 1/3.
_SYMMETRIC_ORBITS = (
    (0.095091634267285, 0.459292588292723),
    (0.103217370534718, 0.170569307751760),
    (0.032458497623198, 0.050547228317031),
)
_CENTROID_WEIGHT = 0.144315607677787
_SIX_ORBIT_WEIGHT = 0.027230314174435
_SIX_ORBIT = (0.008394777409958, 0.263112829634638, 0.728492392955404)

DEGREE = 8


@lru_cache(maxsize=1)
def triangle_rule() -> Tuple[torch.Tensor, torch.Tensor]:
    """Barycentric points (16, 3) and weights (16,) summing to 1.

    The integral over a triangle T is area(T) * sum_q w_q f(x_q).
    """
    points = [(1 / 3, 1 / 3, 1 / 3)]
    weights = [_CENTROID_WEIGHT]
    for w, a in _SYMMETRIC_ORBITS:
        b = 1 - 2 * a
        points += [(a, a, b), (a, b, a), (b, a, a)]
        weights += [w] * 3
    p, q, r = _SIX_ORBIT
    for perm in ((p, q, r), (p, r, q), (q, p, r), (q, r, p), (r, p, q), (r, q, p)):
        points.append(perm)
        weights.append(_SIX_ORBIT_WEIGHT)
    points = torch.tensor(points, dtype=torch.float64)
    # renormalize the last digit so that rows are exact partitions of unity
    points = points / points.sum(dim=-1, keepdim=True)
    return points, torch.tensor(weights, dtype=torch.float64)


def p1_basis(bary: torch.Tensor) -> torch.Tensor:
    return bary


def p2_basis(bary: torch.Tensor) -> torch.Tensor:
    """(..., 6): vertex functions l_a (2 l_a - 1), then 4 l0 l1, 4 l1 l2, 4 l2 l0."""
    l0, l1, l2 = bary.unbind(-1)
    return torch.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        dim=-1,
    )


def p2_basis_grad_bary(bary: torch.Tensor) -> torch.Tensor:
    """(..., 6, 3): derivative of each P2 function w.r.t. each barycentric coordinate.

    Physical gradients follow from sum_a d phi / d l_a * grad(l_a).
    """
    l0, l1, l2 = bary.unbind(-1)
    zero = torch.zeros_like(l0)
    rows = [
        (4 * l0 - 1, zero, zero),
        (zero, 4 * l1 - 1, zero),
        (zero, zero, 4 * l2 - 1),
        (4 * l1, 4 * l0, zero),
        (zero, 4 * l2, 4 * l1),
        (4 * l2, zero, 4 * l0),
    ]
    return torch.stack([torch.stack(r, dim=-1) for r in rows], dim=-2)


@lru_cache(maxsize=8)
def gauss_legendre(n: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """n-point Gauss-Legendre nodes on [0, 1] with weights summing to 1."""
    if n < 1:
        raise ValueError(f"Need at least one Gauss point, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes = torch.from_numpy(0.5 * (nodes + 1.0))
    weights = torch.from_numpy(0.5 * weights)
    return nodes, weights
