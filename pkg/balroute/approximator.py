from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import DemandVector, Vector


@dataclass(frozen=True, eq=False)
class CongestionApproximator:
    """
    A linear operator R with ||Rb||_inf <= OPT_b <= quality * ||Rb||_inf for
    zero-sum demands b. Rows are scaled cut indicators.
    """

    matrix: sp.csr_matrix
    quality: float
    name: str

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, b: DemandVector) -> Vector:
        result: Vector = np.asarray(self.matrix @ b, dtype=np.float64)
        return result

    def apply_transpose(self, y: Vector) -> Vector:
        result: Vector = np.asarray(self.matrix.T @ y, dtype=np.float64)
        return result

    def norm(self, b: DemandVector) -> float:
        if self.rows == 0:
            return 0.0
        return float(np.max(np.abs(self.apply(b))))
