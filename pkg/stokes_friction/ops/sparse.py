from dataclasses import dataclass
from typing import Optional, Tuple

import scipy.sparse as sp
import torch


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Coalesced COO matrix: row-major sorted triplets with duplicates summed."""

    matrix: torch.Tensor

    @classmethod
    def from_triplets(
        cls, rows: torch.Tensor, cols: torch.Tensor, values: torch.Tensor, shape: Tuple[int, int]
    ) -> "SparseOperator":
        indices = torch.stack([rows.reshape(-1), cols.reshape(-1)])
        matrix = torch.sparse_coo_tensor(
            indices, values.reshape(-1).to(torch.float64), size=shape
        ).coalesce()
        return cls(matrix)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.matrix.shape)

    @property
    def rows(self) -> torch.Tensor:
        return self.matrix.indices()[0]

    @property
    def cols(self) -> torch.Tensor:
        return self.matrix.indices()[1]

    @property
    def values(self) -> torch.Tensor:
        return self.matrix.values()

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values.numpy(), (self.rows.numpy(), self.cols.numpy())), shape=self.shape
        )

    def to_dense(self) -> torch.Tensor:
        return self.matrix.to_dense()

    def matvec(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 1:
            return torch.sparse.mm(self.matrix, x[:, None])[:, 0]
        return torch.sparse.mm(self.matrix, x)

    def rmatvec(self, x: torch.Tensor) -> torch.Tensor:
        return self.transpose().matvec(x)

    def quadratic_form(self, x: torch.Tensor, y: Optional[torch.Tensor] = None) -> torch.Tensor:
        y = x if y is None else y
        return torch.dot(y, self.matvec(x))

    def transpose(self) -> "SparseOperator":
        return SparseOperator(self.matrix.t().coalesce())

    def restrict(
        self, row_map: Optional[torch.Tensor] = None, col_map: Optional[torch.Tensor] = None
    ) -> "SparseOperator":
        """Keep entries whose row and column map to a non-negative new index."""
        rows, cols, values = self.rows, self.cols, self.values
        n_rows, n_cols = self.shape
        keep = torch.ones_like(rows, dtype=torch.bool)
        if row_map is not None:
            rows = row_map[rows]
            keep &= rows >= 0
            n_rows = int(row_map.max()) + 1
        if col_map is not None:
            cols = col_map[cols]
            keep &= cols >= 0
            n_cols = int(col_map.max()) + 1
        return SparseOperator.from_triplets(rows[keep], cols[keep], values[keep], (n_rows, n_cols))

    def max_asymmetry(self) -> float:
        diff = (self.matrix - self.matrix.t()).coalesce()
        if diff._nnz() == 0:
            return 0.0
        return float(diff.values().abs().max())
