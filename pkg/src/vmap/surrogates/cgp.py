"""Gaussian process with two categorical factors multiplying the kernel.

The correlation between two points is a squared-exponential term over the
continuous coordinates times one cross-level factor per categorical variable.
The 3x3 cross-level matrices are kept unit-diagonal positive definite through
a hypersphere (angle) parameterization, so the likelihood search runs
unconstrained over log length-scales and angles.  The global mean and overall
variance are profiled out of the likelihood in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .._errors import FitError
from .._kernels import cgp_corr

NUGGET_START = 1e-8
NUGGET_MAX = 1e-2
_LOG_2PI = math.log(2.0 * math.pi)


def corr_from_angles(angles: np.ndarray) -> np.ndarray:
    """Unit-diagonal positive-definite 3x3 correlation from three angles."""
    a0, a1, a2 = angles
    low = np.array(
        [
            [1.0, 0.0, 0.0],
            [math.cos(a0), math.sin(a0), 0.0],
            [math.cos(a1), math.sin(a1) * math.cos(a2), math.sin(a1) * math.sin(a2)],
        ]
    )
    return low @ low.T


@dataclass(frozen=True)
class CGPModel:
    x: np.ndarray
    zio: np.ndarray
    zvm: np.ndarray
    y: np.ndarray
    mu: float
    sigma2: float
    theta: np.ndarray
    tau_io: np.ndarray
    tau_vm: np.ndarray
    nugget: float
    alpha: np.ndarray
    loglik: float
    restart_initial_logliks: tuple[float, ...]
    seed: int

    def correlation_matrix(self) -> np.ndarray:
        """Training correlation, nugget excluded."""
        return cgp_corr(self.x, self.zio, self.zvm, self.x, self.zio, self.zvm,
                        self.theta, self.tau_io, self.tau_vm)

    def predict_values(self, x: np.ndarray, zio: np.ndarray, zvm: np.ndarray) -> np.ndarray:
        cross = cgp_corr(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(zio, dtype=np.int64),
            np.ascontiguousarray(zvm, dtype=np.int64),
            self.x, self.zio, self.zvm,
            self.theta, self.tau_io, self.tau_vm,
        )
        return self.mu + cross @ self.alpha


def _profiled_nll(corr: np.ndarray, y: np.ndarray, nugget: float):
    """Negative log-likelihood with mean and variance profiled out.

    Returns (nll, chol, mu, sigma2, delta) or None when no factorization
    succeeds within the nugget escalation ladder.
    """
    n = corr.shape[0]
    delta = nugget
    while True:
        try:
            chol = np.linalg.cholesky(corr + delta * np.eye(n))
            break
        except np.linalg.LinAlgError:
            delta *= 10.0
            if delta > NUGGET_MAX:
                return None
    with np.errstate(over="ignore", invalid="ignore"):
        a = solve_triangular(chol, y, lower=True, check_finite=False)
        b = solve_triangular(chol, np.ones(n), lower=True, check_finite=False)
        denom = float(b @ b)
        mu = float(b @ a) / denom
        resid = a - mu * b
        sigma2 = float(resid @ resid) / n
    if not math.isfinite(sigma2):
        return math.inf, chol, mu, sigma2, delta
    nll = 0.5 * n * math.log(max(sigma2, 1e-300)) + float(np.sum(np.log(np.diag(chol)))) \
        + 0.5 * n * (_LOG_2PI + 1.0)
    return nll, chol, mu, sigma2, delta


def fit_cgp_arrays(
    x: np.ndarray,
    y: np.ndarray,
    zio: np.ndarray,
    zvm: np.ndarray,
    restarts: int = 10,
    nugget: float | None = None,
    seed: int = 12345,
    maxiter: int = 50,
) -> CGPModel:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    zio = np.ascontiguousarray(zio, dtype=np.int64)
    zvm = np.ascontiguousarray(zvm, dtype=np.int64)
    n, p = x.shape
    if n < 2:
        raise FitError("Gaussian process fit needs at least two points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("Gaussian process fit needs finite inputs and responses")
    if zio.min() < 0 or zio.max() > 2 or zvm.min() < 0 or zvm.max() > 2:
        raise FitError("scheduler codes must lie in {0, 1, 2}")

    base_nugget = NUGGET_START if nugget is None else float(nugget)

    # data-driven length scale: median squared coordinate spread
    sample = x if n <= 1000 else x[np.random.default_rng(seed).choice(n, 1000, replace=False)]
    spread = np.square(sample[:, None, :] - sample[None, :, :]).reshape(-1, p)
    spread = spread[spread.sum(axis=1) > 0]
    med = np.median(spread, axis=0) if spread.size else np.ones(p)
    med = np.where(med > 0, med, 1.0)
    base_log_theta = -np.log(med)

    def nll_of(params: np.ndarray) -> float:
        result = _nll_parts(params)
        return result[0] if result is not None else math.inf

    def _nll_parts(params: np.ndarray):
        log_theta = np.clip(params[:p], -30.0, 30.0)
        theta = np.exp(log_theta)
        tau_io = corr_from_angles(params[p : p + 3])
        tau_vm = corr_from_angles(params[p + 3 : p + 6])
        corr = cgp_corr(x, zio, zvm, x, zio, zvm, theta, tau_io, tau_vm)
        return _profiled_nll(corr, y, base_nugget)

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([base_log_theta, np.full(6, math.pi / 2)])]
    for _ in range(max(0, restarts - 1)):
        starts.append(
            np.concatenate(
                [
                    base_log_theta + rng.uniform(math.log(1e-2), math.log(1e2), size=p),
                    rng.uniform(0.1, math.pi - 0.1, size=6),
                ]
            )
        )

    best_params = None
    best_nll = math.inf
    initial_logliks = []
    for start in starts:
        start_nll = nll_of(start)
        initial_logliks.append(-start_nll)
        if not math.isfinite(start_nll):
            continue
        res = minimize(nll_of, start, method="L-BFGS-B", options={"maxiter": maxiter})
        for cand_nll, cand in ((start_nll, start), (float(res.fun), res.x)):
            if math.isfinite(cand_nll) and cand_nll < best_nll:
                best_nll = cand_nll
                best_params = np.asarray(cand, dtype=np.float64)
    if best_params is None:
        raise FitError("likelihood was non-finite at every restart")

    parts = _nll_parts(best_params)
    if parts is None:
        raise FitError("covariance factorization failed at the selected parameters")
    nll, chol, mu, sigma2, delta = parts
    alpha_w = solve_triangular(chol, y - mu, lower=True)
    alpha = solve_triangular(chol.T, alpha_w, lower=False)

    return CGPModel(
        x=x,
        zio=zio,
        zvm=zvm,
        y=y,
        mu=mu,
        sigma2=sigma2,
        theta=np.exp(np.clip(best_params[:p], -30.0, 30.0)),
        tau_io=corr_from_angles(best_params[p : p + 3]),
        tau_vm=corr_from_angles(best_params[p + 3 : p + 6]),
        nugget=delta,
        alpha=alpha,
        loglik=-nll,
        restart_initial_logliks=tuple(initial_logliks),
        seed=seed,
    )
