# Direct solver for the Stokes saddle-point system
#
#   [ A  B^T  (0) ] [u]   [f]
#   [ B   0   (c) ] [p] = [g]
#   [(0) (c^T) 0  ] [s]   [0]
#
# where the bordered row/column with c = int psi_q only exists in mean-zero gauge.
#
# The factorized matrix is the quasi-definite K = [[A, B^T], [B, -delta D]] with D the
# lumped pressure mass, so every symmetric ordering admits diagonal pivots. The border
# is eliminated with two solves against K and iterative refinement on the true matrix
# removes the O(delta) perturbation.

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import torch
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import splu

from stokes_friction.models.config_friction import BoundaryCondition, PressureGauge
from stokes_friction.modules.mesh import Mesh
from stokes_friction.modules.spaces import DofMap
from stokes_friction.ops.assembly import assemble_b, assemble_h1_gram, assemble_pressure_mass
from stokes_friction.ops.sparse import SparseOperator

logger = logging.getLogger(__name__)

REGULARIZATION = 1e-7
RESIDUAL_TOL = 1e-10
MAX_REFINEMENT = 20
KERNEL_STEPS = 4
KERNEL_TOL = 1e-6
LEAF_SPAN = 4  # lattice units


class SingularSystemError(RuntimeError):
    def __init__(self, message: str, pivot_index: Optional[int] = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class ResidualError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def lattice_coordinates(mesh: Mesh, dofmap: DofMap) -> torch.Tensor:
    """(I, J) position on the P2 lattice of each free velocity dof, then each pressure dof."""
    side = 2 * mesh.n + 1
    node = dofmap.free_dofs // 2
    velocity = torch.stack([node % side, node // side], dim=-1)
    vertex = torch.arange(mesh.n_vertices)
    pressure = 2 * torch.stack([vertex % (mesh.n + 1), vertex // (mesh.n + 1)], dim=-1)
    return torch.cat([velocity, pressure])


def nested_dissection(coords: np.ndarray, leaf_span: int = LEAF_SPAN) -> np.ndarray:
    """Geometric nested dissection of unknowns on the P2 lattice.

    Boxes are cut along an even lattice line strictly inside them. No triangle straddles
    such a line, so the unknowns on it separate the two halves; they are numbered after
    both halves. Inside every piece the original order is kept (velocity before pressure).
    """
    coords = np.asarray(coords)
    pieces: List[np.ndarray] = []

    def dissect(index: np.ndarray):
        if index.size == 0:
            return
        ij = coords[index]
        lo, hi = ij.min(0), ij.max(0)
        axis = int(np.argmax(hi - lo))
        if hi[axis] - lo[axis] <= leaf_span:
            pieces.append(index)
            return
        cut = (lo[axis] + hi[axis]) // 2
        cut -= cut % 2
        c = ij[:, axis]
        dissect(index[c < cut])
        dissect(index[c > cut])
        pieces.append(index[c == cut])

    dissect(np.arange(coords.shape[0]))
    return np.concatenate(pieces)


@dataclass(frozen=True, eq=False)
class SaddleSystem:

    a: SparseOperator  # (n_u, n_u)
    b: SparseOperator  # (n_p, n_u)
    gauge: PressureGauge
    pressure_weights: torch.Tensor  # (n_p,)
    lattice: Optional[torch.Tensor] = None  # (n_u + n_p, 2), enables nested dissection

    def __post_init__(self):
        n_u = self.a.shape[0]
        if self.a.shape != (n_u, n_u):
            raise ValueError(f"Velocity block must be square, got {self.a.shape}")
        if self.b.shape[1] != n_u:
            raise ValueError(f"Divergence block has {self.b.shape[1]} columns, expected {n_u}")
        if self.pressure_weights.shape[0] != self.b.shape[0]:
            raise ValueError("Pressure weights do not match the pressure dof count")
        if self.lattice is not None and self.lattice.shape != (n_u + self.b.shape[0], 2):
            raise ValueError(
                f"Lattice coordinates must have shape ({n_u + self.b.shape[0]}, 2), "
                f"got {tuple(self.lattice.shape)}"
            )

    @property
    def n_velocity(self) -> int:
        return self.a.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.b.shape[0]

    @property
    def size(self) -> int:
        return self.n_velocity + self.n_pressure + int(self.gauge is PressureGauge.MEAN_ZERO)

    def kkt(self) -> sp.csc_matrix:
        a, b = self.a.to_scipy(), self.b.to_scipy()
        if self.gauge is PressureGauge.MEAN_ZERO:
            c = sp.csr_matrix(self.pressure_weights.numpy()[:, None])
            blocks = [[a, b.T, None], [b, None, c], [None, c.T, None]]
        else:
            blocks = [[a, b.T], [b, None]]
        return sp.bmat(blocks, format="csc")

    def regularized(self, delta: float = REGULARIZATION) -> sp.csc_matrix:
        a, b = self.a.to_scipy(), self.b.to_scipy()
        scale = delta / float(a.diagonal().mean())
        c = sp.diags(-scale * self.pressure_weights.numpy())
        return sp.bmat([[a, b.T], [b, c]], format="csc")

    def ordering(self) -> np.ndarray:
        if self.lattice is not None:
            return nested_dissection(self.lattice.numpy())
        a, b = self.a.to_scipy(), self.b.to_scipy()
        pattern = sp.bmat([[a, b.T], [b, None]], format="csr")
        return np.asarray(reverse_cuthill_mckee(pattern, symmetric_mode=True))


@dataclass(frozen=True, eq=False)
class Factorization:

    system: SaddleSystem
    kkt: sp.csc_matrix  # exact matrix, used for refinement
    lu: object  # scipy.sparse.linalg.SuperLU of the permuted regularized matrix
    perm: np.ndarray
    border: Optional[np.ndarray] = None  # (0, c)
    border_solve: Optional[np.ndarray] = None  # K^{-1} (0, c)

    @property
    def fill(self) -> int:
        return int(self.lu.L.nnz + self.lu.U.nnz)

    def _solve_regularized(self, r: np.ndarray) -> np.ndarray:
        x = np.empty_like(r)
        x[self.perm] = self.lu.solve(r[self.perm])
        return x

    def approximate_solve(self, rhs: np.ndarray) -> np.ndarray:
        n = self.perm.shape[0]
        y = self._solve_regularized(rhs[:n])
        if self.border is None:
            return y
        s = (self.border @ y - rhs[n]) / (self.border @ self.border_solve)
        return np.concatenate([y - self.border_solve * s, [s]])


def factorize(system: SaddleSystem, kernel_tol: float = KERNEL_TOL) -> Factorization:
    kkt = system.kkt()
    perm = system.ordering()
    matrix = system.regularized()[perm][:, perm].tocsc()
    try:
        lu = splu(
            matrix,
            permc_spec="NATURAL",
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True, Equil=False),
        )
    except RuntimeError as e:
        raise SingularSystemError(f"Saddle-point matrix is singular: {e}") from e
    fact = Factorization(system=system, kkt=kkt, lu=lu, perm=perm)
    if system.gauge is PressureGauge.MEAN_ZERO:
        border = np.concatenate([np.zeros(system.n_velocity), system.pressure_weights.numpy()])
        fact = Factorization(
            system=system, kkt=kkt, lu=lu, perm=perm,
            border=border, border_solve=fact._solve_regularized(border),
        )

    # a kernel vector of the exact matrix is a fixed point of x - M^{-1} K x
    x = np.random.default_rng(0).standard_normal(system.size)
    start = np.linalg.norm(x)
    for _ in range(KERNEL_STEPS):
        x = x - fact.approximate_solve(kkt @ x)
    remaining = np.linalg.norm(x) / start
    if not remaining <= kernel_tol:
        index = int(np.argmax(np.abs(x)))
        raise SingularSystemError(
            f"Saddle-point matrix is numerically singular: {remaining:.3e} of a random vector "
            f"survives refinement, largest at index {index} (gauge {system.gauge.value})",
            pivot_index=index,
        )
    logger.debug(
        "Factorized %d x %d saddle-point matrix (nnz=%d, fill=%d)", *kkt.shape, kkt.nnz, fact.fill
    )
    return fact


def solve(
    fact: Factorization,
    momentum_rhs: torch.Tensor,
    continuity_rhs: Optional[torch.Tensor] = None,
    rtol: float = RESIDUAL_TOL,
) -> Tuple[torch.Tensor, torch.Tensor]:
    system = fact.system
    n_u, n_p = system.n_velocity, system.n_pressure
    if momentum_rhs.shape != (n_u,):
        raise ValueError(f"Momentum rhs must have shape ({n_u},), got {tuple(momentum_rhs.shape)}")
    if continuity_rhs is None:
        continuity_rhs = torch.zeros(n_p, dtype=torch.float64)
    if continuity_rhs.shape != (n_p,):
        raise ValueError(
            f"Continuity rhs must have shape ({n_p},), got {tuple(continuity_rhs.shape)}"
        )
    rhs = np.zeros(system.size)
    rhs[:n_u] = momentum_rhs.numpy()
    rhs[n_u : n_u + n_p] = continuity_rhs.numpy()
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return torch.zeros(n_u, dtype=torch.float64), torch.zeros(n_p, dtype=torch.float64)
    x = np.zeros(system.size)
    r = rhs
    for _ in range(MAX_REFINEMENT):
        x = x + fact.approximate_solve(r)
        r = rhs - fact.kkt @ x
        residual = np.linalg.norm(r) / rhs_norm
        if residual <= rtol:
            break
    else:
        raise ResidualError(
            f"Saddle-point solve residual {residual:.3e} exceeds {rtol:.1e} after "
            f"{MAX_REFINEMENT} refinement steps",
            residual=residual,
        )
    return torch.from_numpy(x[:n_u].copy()), torch.from_numpy(x[n_u : n_u + n_p].copy())


def inf_sup_constant(mesh: Mesh, dofmap: DofMap) -> float:
    """beta_h = min over admissible q of sup_v b(v, q) / (|v|_H1 |q|_L2).

    Computed from the generalized eigenproblem B K^{-1} B^T q = beta^2 M_p q with K the
    H1 Gram matrix. Under SBCF constants are in the kernel of B^T and are skipped.
    """
    k = assemble_h1_gram(mesh, dofmap).to_dense().numpy()
    b = assemble_b(mesh, dofmap).to_dense().numpy()
    mp = assemble_pressure_mass(mesh).to_dense().numpy()
    schur = b @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(k), b.T)
    eigs = scipy.linalg.eigh(0.5 * (schur + schur.T), mp, eigvals_only=True)
    eigs = np.clip(eigs, 0.0, None)
    skip = 1 if dofmap.bc is BoundaryCondition.SBCF else 0
    return float(np.sqrt(eigs[skip]))
