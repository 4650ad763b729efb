"""Linear Shepard surrogate: inverse-distance blend of local linear fits.

Each node carries a local plane fitted by weighted least squares over the
neighbors inside its fit radius; a prediction blends the planes of all nodes
whose weight ball contains the query.  Queries outside every ball fall back
to the nearest node's plane and are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._errors import FitError
from .._kernels import lsp_local_betas, lsp_predict


def local_fit_count(n: int, p: int) -> int:
    """Neighbor count used by the local fits."""
    return min(n, math.ceil(3 * p / 2))


@dataclass(frozen=True)
class LSPModel:
    nodes: np.ndarray
    values: np.ndarray
    betas: np.ndarray
    u: np.ndarray
    v: np.ndarray
    m: int
    dmax: float

    def predict_values(self, x: np.ndarray) -> np.ndarray:
        preds, _ = lsp_predict(self.nodes, self.values, self.betas, self.u, self.dmax, x)
        return preds

    def predict_with_flags(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictions plus a flag marking queries outside every weight ball."""
        return lsp_predict(self.nodes, self.values, self.betas, self.u, self.dmax, x)


def fit_lsp_arrays(x: np.ndarray, y: np.ndarray) -> LSPModel:
    n, p = x.shape
    if n < p + 2:
        raise FitError(f"linear Shepard fit needs at least {p + 2} points, got {n}")

    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off_diag = dist + np.diag(np.full(n, np.inf))
    dup_i, dup_j = np.nonzero(off_diag == 0.0)
    if dup_i.size:
        i, j = int(dup_i[0]), int(dup_j[0])
        raise FitError(f"duplicate points at indices {min(i, j)} and {max(i, j)}")

    dmax = float(dist.max())
    m = local_fit_count(n, p)
    # radius of the ball holding the m nearest neighbors (self excluded)
    kth = min(m, n - 1)
    r = np.partition(off_diag, kth - 1, axis=1)[:, kth - 1]
    u = np.minimum(dmax / 2.0, r)
    v = 1.1 * r

    betas = lsp_local_betas(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
    )
    return LSPModel(
        nodes=np.ascontiguousarray(x, dtype=np.float64),
        values=np.ascontiguousarray(y, dtype=np.float64),
        betas=betas,
        u=np.ascontiguousarray(u, dtype=np.float64),
        v=np.ascontiguousarray(v, dtype=np.float64),
        m=m,
        dmax=dmax,
    )
