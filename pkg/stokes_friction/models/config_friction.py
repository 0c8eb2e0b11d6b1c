from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import torch


class BoundaryCondition(str, Enum):
    """Friction law on the top side y = 1 of the unit square."""

    SBCF = "sbcf"  # slip: tangential velocity vs tangential stress
    LBCF = "lbcf"  # leak: normal velocity vs normal stress

    @property
    def trace_component(self) -> int:
        # tau = (1, 0), n = (0, 1) on y = 1
        return 0 if self is BoundaryCondition.SBCF else 1

    @property
    def pinned_component(self) -> int:
        return 1 - self.trace_component

    @property
    def default_gauge(self) -> "PressureGauge":
        if self is BoundaryCondition.SBCF:
            return PressureGauge.MEAN_ZERO
        return PressureGauge.FULL


class PressureGauge(str, Enum):
    MEAN_ZERO = "mean-zero"
    FULL = "full"


class PressureNormalization(str, Enum):
    POINT_MATCH = "point-match"  # shift so that p(0, 0) agrees
    MEAN_ZERO = "mean-zero"


# (bc, g, rho, lambda_init) settings of the N = 10 multiplier experiment.
MULTIPLIER_TABLE_COLUMNS: Tuple[Tuple[BoundaryCondition, float, float, float], ...] = (
    (BoundaryCondition.SBCF, 0.1, 1000.0, 0.0),
    (BoundaryCondition.SBCF, 0.8, 50.0, 0.0),
    (BoundaryCondition.SBCF, 2.0, 3.0, 0.0),
    (BoundaryCondition.LBCF, 0.1, 20.0, 0.0),
    (BoundaryCondition.LBCF, 1.2, 30.0, 0.0),
    (BoundaryCondition.LBCF, 3.0, 2.0, 0.0),
    (BoundaryCondition.LBCF, 3.0, 2.0, 0.2),
)

DEFAULT_LEVELS = (10, 12, 15, 20, 24, 30, 40)
DEFAULT_REFERENCE = 120
FALLBACK_REFERENCE = 80


def default_rho(bc: BoundaryCondition, g: float) -> float:
    """Step size of the tabulated experiment for (bc, g), else 6 / g."""
    for col_bc, col_g, col_rho, _ in MULTIPLIER_TABLE_COLUMNS:
        if col_bc is bc and col_g == g:
            return col_rho
    if g <= 0:
        raise ValueError(f"Friction modulus must be positive, got g={g}")
    return 6.0 / g


@dataclass
class UzawaParams:

    rho: float = 1.0
    lambda_init: Union[float, torch.Tensor] = 0.0
    tol: float = 1e-5
    max_iter: int = 1000

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if isinstance(self.lambda_init, torch.Tensor):
            self.lambda_init = self.lambda_init.to(torch.float64).clamp(-1.0, 1.0)
        else:
            self.lambda_init = min(1.0, max(-1.0, float(self.lambda_init)))


@dataclass
class SolverConfig:

    n: int = 10
    bc: BoundaryCondition = BoundaryCondition.SBCF
    gauge: Optional[PressureGauge] = None
    nu: float = 1.0
    g: float = 1.0
    uzawa: UzawaParams = field(default_factory=UzawaParams)

    def __post_init__(self):
        self.bc = BoundaryCondition(self.bc)
        if self.gauge is None:
            self.gauge = self.bc.default_gauge
        self.gauge = PressureGauge(self.gauge)
        if self.n < 2:
            raise ValueError(f"Mesh needs N >= 2 divisions, got {self.n}")
        if not self.nu > 0:
            raise ValueError(f"Viscosity must be positive, got nu={self.nu}")
        if not self.g > 0:
            raise ValueError(f"Friction modulus must be positive, got g={self.g}")


@dataclass
class StudyConfig:

    bc: BoundaryCondition = BoundaryCondition.SBCF
    g: float = 0.8
    levels: Sequence[int] = DEFAULT_LEVELS
    reference: int = DEFAULT_REFERENCE
    rho: Optional[float] = None
    lambda_init: float = 0.0
    tol: float = 1e-5
    max_iter: int = 1000
    nu: float = 1.0
    normalization: PressureNormalization = PressureNormalization.POINT_MATCH
    output: Optional[str] = None

    def __post_init__(self):
        self.bc = BoundaryCondition(self.bc)
        self.normalization = PressureNormalization(self.normalization)
        self.levels = tuple(int(n) for n in self.levels)
        if not self.levels:
            raise ValueError("A convergence study needs at least one level")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"Levels must be strictly increasing, got {self.levels}")
        if self.rho is None:
            self.rho = default_rho(self.bc, self.g)

    def uzawa_params(self) -> UzawaParams:
        return UzawaParams(
            rho=self.rho, lambda_init=self.lambda_init, tol=self.tol, max_iter=self.max_iter
        )


@dataclass
class RunConfig:
    """Validated command line: one of the four commands plus its settings."""

    command: str
    solver: Optional[SolverConfig] = None
    study: Optional[StudyConfig] = None
    columns: Sequence[Tuple[BoundaryCondition, float, float, float]] = MULTIPLIER_TABLE_COLUMNS
    g_values: Sequence[float] = ()
    rho: Optional[float] = None
    output: str = "out"

    def __post_init__(self):
        if self.command not in ("solve", "convergence", "thresholds", "multiplier-table"):
            raise ValueError(f"Unknown command {self.command}")
