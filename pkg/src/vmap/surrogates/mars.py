"""Adaptive regression splines: hinge-product bases grown forward by residual
reduction and pruned backward by generalized cross-validation.

The forward pass scores every candidate hinge pair through a rank-2 update of
the current least-squares fit (see mars_scan in the kernels module), then
refits exactly before committing a step.  The backward pass evaluates every
single-basis deletion and keeps the visited subset with the smallest GCV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._errors import FitError
from .._kernels import mars_scan


@dataclass(frozen=True)
class HingeFactor:
    var: int
    knot: float
    positive: bool  # True for (x - t)_+, False for (t - x)_+

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        d = x[:, self.var] - self.knot
        return np.maximum(d if self.positive else -d, 0.0)


@dataclass(frozen=True)
class MARSBasis:
    factors: tuple[HingeFactor, ...] = ()

    @property
    def order(self) -> int:
        return len(self.factors)

    def uses_var(self, var: int) -> bool:
        return any(f.var == var for f in self.factors)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = np.ones(x.shape[0])
        for factor in self.factors:
            out *= factor.evaluate(x)
        return out


@dataclass(frozen=True)
class MARSModel:
    bases: tuple[MARSBasis, ...]
    coefficients: np.ndarray
    gcv: float
    backward_gcvs: tuple[float, ...]
    forward_rss: tuple[float, ...]

    def basis_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.column_stack([b.evaluate(x) for b in self.bases])

    def predict_values(self, x: np.ndarray) -> np.ndarray:
        return self.basis_matrix(x) @ self.coefficients


def default_max_bases(n: int) -> int:
    return math.ceil(2.0 * math.sqrt(min(n, 200)))


def _gcv(rss: float, n: int, n_coef: int, n_knots: int, penalty: float) -> float:
    cost = n_coef + penalty * n_knots
    if cost >= n:
        return math.inf
    return (rss / n) / (1.0 - cost / n) ** 2


def _knot_count(bases) -> int:
    return sum(b.order for b in bases)


def _chol_gram(basis: np.ndarray) -> np.ndarray:
    gram = basis.T @ basis
    ridge = 1e-12 * max(float(np.mean(np.diag(gram))), 1e-300)
    for _ in range(20):
        try:
            return np.linalg.cholesky(gram + ridge * np.eye(gram.shape[0]))
        except np.linalg.LinAlgError:
            ridge *= 10.0
    raise FitError("basis Gram matrix could not be factorized")


def fit_mars_arrays(
    x: np.ndarray,
    y: np.ndarray,
    max_order: int = 3,
    max_bases: int | None = None,
    gcv_penalty: float = 3.0,
) -> MARSModel:
    n, p = x.shape
    if max_bases is None:
        max_bases = default_max_bases(n)
    if max_bases < 1:
        raise FitError(f"max_bases must be at least 1, got {max_bases}")
    if max_order < 1:
        raise FitError(f"max_order must be at least 1, got {max_order}")

    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)

    bases: list[MARSBasis] = [MARSBasis()]
    basis = np.ones((n, 1))
    coef, rss = _refit(basis, y)
    forward_rss = [rss]
    stop_eps = 1e-12 * (rss + 1.0)

    # ---------------- forward pass ----------------
    while len(bases) - 1 < max_bases and basis.shape[1] + 2 < n:
        pair_parent, pair_var, knots, knot_off = _candidates(x, basis, bases, max_order)
        if not pair_parent.size:
            break
        resid = y - basis @ coef
        chol = _chol_gram(basis)
        best_pair, best_knot, best_dec = mars_scan(
            basis, chol, resid, x, pair_parent, pair_var, knots, knot_off, rss
        )
        if best_pair < 0 or best_dec <= stop_eps:
            break

        parent = bases[pair_parent[best_pair]]
        var = int(pair_var[best_pair])
        new_cols = []
        new_bases = []
        for positive in (True, False):
            factor = HingeFactor(var=var, knot=float(best_knot), positive=positive)
            cand = MARSBasis(factors=parent.factors + (factor,))
            col = cand.evaluate(x)
            new_cols.append(col)
            new_bases.append(cand)
        # drop a degenerate side (knot at the edge of the parent's active region)
        ss = [float(col @ col) for col in new_cols]
        keep = [k for k in range(2) if ss[k] > 1e-20 * (ss[0] + ss[1])]
        trial_basis = np.column_stack([basis] + [new_cols[k] for k in keep])
        trial_coef, trial_rss = _refit(trial_basis, y)
        if trial_rss >= rss - stop_eps:
            break
        basis, coef, rss = trial_basis, trial_coef, trial_rss
        bases.extend(new_bases[k] for k in keep)
        forward_rss.append(rss)

    # ---------------- backward pass ----------------
    visited_gcvs = []
    gcv_penalty = float(gcv_penalty)

    def evaluate_subset(indices: list[int]) -> tuple[float, float]:
        sub = basis[:, indices]
        _, sub_rss = _refit(sub, y)
        sub_gcv = _gcv(sub_rss, n, len(indices), _knot_count(bases[i] for i in indices), gcv_penalty)
        visited_gcvs.append(sub_gcv)
        return sub_rss, sub_gcv

    current = list(range(len(bases)))
    _, current_gcv = evaluate_subset(current)
    best_subset, best_gcv = list(current), current_gcv

    while len(current) > 1:
        trial_results = []
        for drop in current[1:]:  # the constant basis is never removed
            subset = [i for i in current if i != drop]
            sub_rss, sub_gcv = evaluate_subset(subset)
            trial_results.append((sub_rss, subset, sub_gcv))
            if sub_gcv <= best_gcv:
                best_subset, best_gcv = subset, sub_gcv
        trial_results.sort(key=lambda t: t[0])
        current = trial_results[0][1]

    final_coef, final_rss = _refit(basis[:, best_subset], y)
    return MARSModel(
        bases=tuple(bases[i] for i in best_subset),
        coefficients=final_coef,
        gcv=best_gcv,
        backward_gcvs=tuple(visited_gcvs),
        forward_rss=tuple(forward_rss),
    )


def _refit(basis: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return coef, float(resid @ resid)


def _candidates(x, basis, bases, max_order):
    """Enumerate (parent, variable) pairs and their admissible knots."""
    n, p = x.shape
    pair_parent = []
    pair_var = []
    knot_chunks = []
    offsets = [0]
    for b_idx, parent in enumerate(bases):
        if parent.order >= max_order:
            continue
        active = basis[:, b_idx] != 0.0
        if not active.any():
            continue
        for var in range(p):
            if parent.uses_var(var):
                continue
            values = np.unique(x[active, var])
            if values.size == 0:
                continue
            pair_parent.append(b_idx)
            pair_var.append(var)
            knot_chunks.append(values)
            offsets.append(offsets[-1] + values.size)
    if not pair_parent:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0), np.zeros(1, dtype=np.int64)
    return (
        np.asarray(pair_parent, dtype=np.int64),
        np.asarray(pair_var, dtype=np.int64),
        np.ascontiguousarray(np.concatenate(knot_chunks), dtype=np.float64),
        np.asarray(offsets, dtype=np.int64),
    )
