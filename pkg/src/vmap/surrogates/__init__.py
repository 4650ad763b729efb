"""Uniform fit/predict surface over the five surrogate families.

Non-GP kinds are fitted one model per categorical triple; the categorical
Gaussian process is fitted one model per operation mode with the two
scheduler variables entering the covariance.  Responses are transformed to
the spec's modeling scale before fitting, and predictions always come back
on the original scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .._errors import FitError, VmapError
from ..dataspace import (
    SCHEDULERS,
    ContinuousPoint,
    VariabilityMapKey,
    VariabilityObservation,
    transform_response,
)
from .cgp import CGPModel, corr_from_angles, fit_cgp_arrays
from .gamma_glm import DESIGN_COLUMNS, GammaGLMModel, fit_gamma_glm_arrays, glm_design
from .linear import LMModel, fit_lm_arrays
from .lsp import LSPModel, fit_lsp_arrays, local_fit_count
from .mars import HingeFactor, MARSBasis, MARSModel, fit_mars_arrays

MODEL_KINDS = ("LM", "GAMGLM", "LSP", "MARS", "CGP")

_DEFAULT_HYPERPARAMETERS: dict[str, dict] = {
    "LM": {},
    "GAMGLM": {"max_iter": 100, "tol": 1e-10},
    "LSP": {},
    "MARS": {"max_order": 3, "max_bases": None, "gcv_penalty": 3.0},
    "CGP": {"restarts": 10, "nugget": None, "seed": 12345, "maxiter": 50},
}


@dataclass(frozen=True)
class ModelSpec:
    """Model kind, response scale, and validated kind-specific settings."""

    kind: str
    response_scale: str = "raw"
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise VmapError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        if self.response_scale not in ("log", "raw"):
            raise VmapError(f"response_scale must be 'log' or 'raw', got {self.response_scale!r}")
        allowed = _DEFAULT_HYPERPARAMETERS[self.kind]
        unknown = set(self.hyperparameters) - set(allowed)
        if unknown:
            raise VmapError(
                f"unknown hyperparameters for {self.kind}: {sorted(unknown)}; allowed: {sorted(allowed)}"
            )

    def setting(self, name: str):
        return self.hyperparameters.get(name, _DEFAULT_HYPERPARAMETERS[self.kind][name])

    def settings(self) -> dict:
        return {**_DEFAULT_HYPERPARAMETERS[self.kind], **self.hyperparameters}


@dataclass(frozen=True)
class SurrogateModel:
    """A fitted surrogate bound to its map key, response, and scale."""

    spec: ModelSpec
    response: str  # "pvm" or "mean_throughput"
    key: VariabilityMapKey | None
    io_mode: str | None
    core: object


def scheduler_code(name: str) -> int:
    try:
        return SCHEDULERS.index(name)
    except ValueError:
        raise VmapError(f"unknown scheduler {name!r}") from None


def observations_matrix(data: Sequence[VariabilityObservation]) -> np.ndarray:
    return np.array([obs.point.as_array() for obs in data])


def fit(
    spec: ModelSpec,
    data: Sequence[VariabilityObservation],
    response: str = "pvm",
) -> SurrogateModel:
    """Fit one surrogate of the requested kind on one variability map.

    For CGP, `data` must hold a single operation mode and may span scheduler
    levels; every other kind requires a single categorical triple.
    """
    if not data:
        raise FitError("cannot fit a surrogate on an empty observation set")
    if response not in ("pvm", "mean_throughput"):
        raise VmapError(f"unknown response {response!r}")

    x = observations_matrix(data)
    raw = np.array([getattr(obs, response) for obs in data], dtype=float)
    try:
        y = np.array([transform_response(v, spec.response_scale) for v in raw])
    except VmapError as exc:
        raise FitError(str(exc)) from None

    if spec.kind == "CGP":
        modes = {obs.config.io_mode for obs in data}
        if len(modes) != 1:
            raise FitError(f"CGP fits one operation mode at a time, got {sorted(modes)}")
        zio = np.array([scheduler_code(obs.config.io_scheduler) for obs in data], dtype=np.int64)
        zvm = np.array([scheduler_code(obs.config.vm_io_scheduler) for obs in data], dtype=np.int64)
        settings = spec.settings()
        core = fit_cgp_arrays(
            x, y, zio, zvm,
            restarts=settings["restarts"],
            nugget=settings["nugget"],
            seed=settings["seed"],
            maxiter=settings["maxiter"],
        )
        return SurrogateModel(spec=spec, response=response, key=None,
                              io_mode=modes.pop(), core=core)

    keys = {obs.key for obs in data}
    if len(keys) != 1:
        raise FitError(f"{spec.kind} fits one categorical triple at a time, got {len(keys)}")
    key = keys.pop()

    if spec.kind == "LM":
        core = fit_lm_arrays(x, y)
    elif spec.kind == "GAMGLM":
        core = fit_gamma_glm_arrays(x, y, max_iter=spec.setting("max_iter"), tol=spec.setting("tol"))
    elif spec.kind == "LSP":
        core = fit_lsp_arrays(x, y)
    else:  # MARS
        core = fit_mars_arrays(
            x, y,
            max_order=spec.setting("max_order"),
            max_bases=spec.setting("max_bases"),
            gcv_penalty=spec.setting("gcv_penalty"),
        )
    return SurrogateModel(spec=spec, response=response, key=key, io_mode=None, core=core)


def fit_performance_surface(
    spec: ModelSpec, observations: Sequence[VariabilityObservation]
) -> SurrogateModel:
    """Fit the mean-throughput surface with the same machinery as fit()."""
    return fit(spec, observations, response="mean_throughput")


def _check_key(model: SurrogateModel, key: VariabilityMapKey | None) -> VariabilityMapKey:
    if key is None:
        if model.key is None:
            raise VmapError("CGP prediction needs a map key for the scheduler levels")
        return model.key
    if model.io_mode is not None:
        if key.io_mode != model.io_mode:
            raise VmapError(
                f"model was trained on mode {model.io_mode!r}, queried with {key.io_mode!r}"
            )
    elif key != model.key:
        raise VmapError(f"model was trained on map {model.key}, queried with {key}")
    return key


def predict_batch(
    model: SurrogateModel,
    x: np.ndarray,
    key: VariabilityMapKey | None = None,
) -> np.ndarray:
    """Original-scale predictions at encoded points (rows of x)."""
    key = _check_key(model, key)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model.io_mode is not None:
        code_io = np.full(x.shape[0], scheduler_code(key.io_scheduler), dtype=np.int64)
        code_vm = np.full(x.shape[0], scheduler_code(key.vm_io_scheduler), dtype=np.int64)
        values = model.core.predict_values(x, code_io, code_vm)
    else:
        values = model.core.predict_values(x)
    if model.spec.response_scale == "log":
        values = np.exp(values)
    return values


def predict(
    model: SurrogateModel,
    point: ContinuousPoint,
    key: VariabilityMapKey | None = None,
) -> float:
    """Original-scale prediction at one point."""
    return float(predict_batch(model, point.as_array()[None, :], key)[0])


def predict_with_flag(
    model: SurrogateModel,
    point: ContinuousPoint,
    key: VariabilityMapKey | None = None,
) -> tuple[float, bool]:
    """Prediction plus a flag set when an LSP query fell outside every
    weight ball and was answered by the nearest node's local fit."""
    key = _check_key(model, key)
    if not isinstance(model.core, LSPModel):
        return predict(model, point, key), False
    values, flags = model.core.predict_with_flags(point.as_array()[None, :])
    value = float(values[0])
    if model.spec.response_scale == "log":
        value = math.exp(value)
    return value, bool(flags[0])


# convenience wrappers mirroring the per-kind fitting operations

def fit_gamma_glm(data, max_iter: int = 100, tol: float = 1e-10,
                  response_scale: str = "raw") -> SurrogateModel:
    spec = ModelSpec("GAMGLM", response_scale, {"max_iter": max_iter, "tol": tol})
    return fit(spec, data)


def fit_lsp(data, response_scale: str = "raw") -> SurrogateModel:
    return fit(ModelSpec("LSP", response_scale), data)


def fit_mars(data, max_order: int = 3, max_bases: int | None = None,
             gcv_penalty: float = 3.0, response_scale: str = "raw") -> SurrogateModel:
    spec = ModelSpec(
        "MARS", response_scale,
        {"max_order": max_order, "max_bases": max_bases, "gcv_penalty": gcv_penalty},
    )
    return fit(spec, data)


def fit_cgp(data, restarts: int = 10, nugget: float | None = None,
            seed: int = 12345, maxiter: int = 50,
            response_scale: str = "raw") -> SurrogateModel:
    spec = ModelSpec(
        "CGP", response_scale,
        {"restarts": restarts, "nugget": nugget, "seed": seed, "maxiter": maxiter},
    )
    return fit(spec, data)


__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "SurrogateModel",
    "fit",
    "fit_performance_surface",
    "fit_gamma_glm",
    "fit_lsp",
    "fit_mars",
    "fit_cgp",
    "predict",
    "predict_batch",
    "predict_with_flag",
    "scheduler_code",
    "observations_matrix",
    "LMModel",
    "GammaGLMModel",
    "LSPModel",
    "MARSModel",
    "MARSBasis",
    "HingeFactor",
    "CGPModel",
    "corr_from_angles",
    "glm_design",
    "DESIGN_COLUMNS",
    "local_fit_count",
    "fit_lm_arrays",
    "fit_gamma_glm_arrays",
    "fit_lsp_arrays",
    "fit_mars_arrays",
    "fit_cgp_arrays",
]
