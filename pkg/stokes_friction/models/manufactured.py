# Closed-form smooth solution of the Stokes problem on the unit square, adhesive on all
# four sides, used as the body-force source and as the exact reference in error studies.

from dataclasses import dataclass

import torch


def _x_factors(x):
    # X = x^2 (1-x)^2 and its first three derivatives
    X = x**2 * (1 - x) ** 2
    dX = 2 * x * (1 - x) * (1 - 2 * x)
    d2X = 2 * (1 - 6 * x + 6 * x**2)
    d3X = 12 * (2 * x - 1)
    return X, dX, d2X, d3X


def _y_factors(y):
    # Y = y (1-y) (1-2y), Z = y^2 (1-y)^2 with Z' = 2Y
    Y = y * (1 - y) * (1 - 2 * y)
    dY = 1 - 6 * y + 6 * y**2
    d2Y = 12 * y - 6
    Z = y**2 * (1 - y) ** 2
    return Y, dY, d2Y, Z


def _smoothstep(x):
    return 6 * x**5 - 15 * x**4 + 10 * x**3


@dataclass(frozen=True)
class ManufacturedCase:
    """
    u1 = 20 x^2 (1-x)^2 y (1-y) (1-2y)
    u2 = -20 x (1-x) (1-2x) y^2 (1-y)^2
    p  = 40 x (1-x) (1-2x) y (1-y) (1-2y) + 4 (6x^5 - 15x^4 + 10x^3) (2y - 1) - 2
    f  = -nu lap(u) + grad(p)

    All evaluators take points of shape (..., 2) and broadcast over the leading dims.
    """

    nu: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"Viscosity must be positive, got nu={self.nu}")

    def velocity(self, xy: torch.Tensor) -> torch.Tensor:
        x, y = xy[..., 0], xy[..., 1]
        X, dX, _, _ = _x_factors(x)
        Y, _, _, Z = _y_factors(y)
        return torch.stack([20 * X * Y, -10 * dX * Z], dim=-1)

    def velocity_gradient(self, xy: torch.Tensor) -> torch.Tensor:
        """(..., 2, 2) with entry [i, j] = d u_i / d x_j."""
        x, y = xy[..., 0], xy[..., 1]
        X, dX, d2X, _ = _x_factors(x)
        Y, dY, _, Z = _y_factors(y)
        row1 = torch.stack([20 * dX * Y, 20 * X * dY], dim=-1)
        row2 = torch.stack([-10 * d2X * Z, -20 * dX * Y], dim=-1)
        return torch.stack([row1, row2], dim=-2)

    def pressure(self, xy: torch.Tensor) -> torch.Tensor:
        x, y = xy[..., 0], xy[..., 1]
        _, dX, _, _ = _x_factors(x)
        Y, _, _, _ = _y_factors(y)
        return 20 * dX * Y + 4 * _smoothstep(x) * (2 * y - 1) - 2

    def laplacian_velocity(self, xy: torch.Tensor) -> torch.Tensor:
        x, y = xy[..., 0], xy[..., 1]
        X, dX, d2X, d3X = _x_factors(x)
        Y, dY, d2Y, Z = _y_factors(y)
        lap1 = 20 * (d2X * Y + X * d2Y)
        lap2 = -10 * (d3X * Z + 2 * dX * dY)
        return torch.stack([lap1, lap2], dim=-1)

    def pressure_gradient(self, xy: torch.Tensor) -> torch.Tensor:
        x, y = xy[..., 0], xy[..., 1]
        X, dX, d2X, _ = _x_factors(x)
        Y, dY, _, _ = _y_factors(y)
        # d/dx smoothstep = 30 X
        dpdx = 20 * d2X * Y + 120 * X * (2 * y - 1)
        dpdy = 20 * dX * dY + 8 * _smoothstep(x)
        return torch.stack([dpdx, dpdy], dim=-1)

    def body_force(self, xy: torch.Tensor) -> torch.Tensor:
        return -self.nu * self.laplacian_velocity(xy) + self.pressure_gradient(xy)

    def sigma_tau(self, x: torch.Tensor) -> torch.Tensor:
        """Tangential stress on y = 1 (tau = (1, 0))."""
        X, _, _, _ = _x_factors(x)
        return self.nu * 20 * X

    def sigma_n(self, x: torch.Tensor) -> torch.Tensor:
        """Normal stress on y = 1 (n = (0, 1)); du2/dy vanishes there."""
        return 2 - 4 * _smoothstep(x)


class ZeroForceCase(ManufacturedCase):
    """Homogeneous source; the discrete solution is identically zero."""

    def body_force(self, xy: torch.Tensor) -> torch.Tensor:
        return torch.zeros(*xy.shape[:-1], 2, dtype=xy.dtype)
