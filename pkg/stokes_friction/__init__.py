__version__ = "0.1.0"

from stokes_friction.models.config_friction import (
    BoundaryCondition,
    PressureGauge,
    PressureNormalization,
    SolverConfig,
    StudyConfig,
    UzawaParams,
)
from stokes_friction.models.manufactured import ManufacturedCase
from stokes_friction.modules.mesh import build_friedrichs_keller, extract_gamma1_trace, mesh_size
from stokes_friction.modules.spaces import build_dof_map
from stokes_friction.ops.friction_boundary import BoundaryTrace, FrictionModulus
from stokes_friction.models.friction_stokes import FrictionStokesSolver
from stokes_friction.utils.uzawa import run_uzawa
