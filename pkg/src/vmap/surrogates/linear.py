"""Ordinary least-squares linear surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._errors import FitError


@dataclass(frozen=True)
class LMModel:
    beta0: float
    beta: np.ndarray

    def predict_values(self, x: np.ndarray) -> np.ndarray:
        return self.beta0 + x @ self.beta


def fit_lm_arrays(x: np.ndarray, y: np.ndarray) -> LMModel:
    n, p = x.shape
    design = np.hstack([np.ones((n, 1)), x])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < p + 1:
        raise FitError(f"singular design: rank {rank} < {p + 1} columns")
    return LMModel(beta0=float(coef[0]), beta=coef[1:].copy())
