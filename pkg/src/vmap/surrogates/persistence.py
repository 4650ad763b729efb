"""Versioned JSON serialization for fitted surrogates.

Every model saves a self-describing document (kind tag, hyperparameters, and
all fitted state) so that a loaded model reproduces predictions exactly:
floats travel through JSON via shortest-round-trip repr.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .._errors import VmapError
from ..dataspace import VariabilityMapKey
from . import ModelSpec, SurrogateModel
from .cgp import CGPModel
from .gamma_glm import GammaGLMModel
from .linear import LMModel
from .lsp import LSPModel
from .mars import HingeFactor, MARSBasis, MARSModel

FORMAT_NAME = "vmap-models"
FORMAT_VERSION = 1


def _core_to_dict(core) -> dict:
    if isinstance(core, LMModel):
        return {"type": "LM", "beta0": core.beta0, "beta": core.beta.tolist()}
    if isinstance(core, GammaGLMModel):
        return {
            "type": "GAMGLM",
            "coefficients": core.coefficients.tolist(),
            "dispersion": core.dispersion,
            "deviance_trace": list(core.deviance_trace),
        }
    if isinstance(core, LSPModel):
        return {
            "type": "LSP",
            "nodes": core.nodes.tolist(),
            "values": core.values.tolist(),
            "betas": core.betas.tolist(),
            "u": core.u.tolist(),
            "v": core.v.tolist(),
            "m": core.m,
            "dmax": core.dmax,
        }
    if isinstance(core, MARSModel):
        return {
            "type": "MARS",
            "bases": [
                [{"var": f.var, "knot": f.knot, "positive": f.positive} for f in b.factors]
                for b in core.bases
            ],
            "coefficients": core.coefficients.tolist(),
            "gcv": core.gcv,
            "backward_gcvs": list(core.backward_gcvs),
            "forward_rss": list(core.forward_rss),
        }
    if isinstance(core, CGPModel):
        return {
            "type": "CGP",
            "x": core.x.tolist(),
            "zio": core.zio.tolist(),
            "zvm": core.zvm.tolist(),
            "y": core.y.tolist(),
            "mu": core.mu,
            "sigma2": core.sigma2,
            "theta": core.theta.tolist(),
            "tau_io": core.tau_io.tolist(),
            "tau_vm": core.tau_vm.tolist(),
            "nugget": core.nugget,
            "alpha": core.alpha.tolist(),
            "loglik": core.loglik,
            "restart_initial_logliks": list(core.restart_initial_logliks),
            "seed": core.seed,
        }
    raise VmapError(f"cannot serialize model core {type(core).__name__}")


def _core_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "LM":
        return LMModel(beta0=doc["beta0"], beta=np.array(doc["beta"]))
    if kind == "GAMGLM":
        return GammaGLMModel(
            coefficients=np.array(doc["coefficients"]),
            dispersion=doc["dispersion"],
            deviance_trace=tuple(doc["deviance_trace"]),
        )
    if kind == "LSP":
        return LSPModel(
            nodes=np.array(doc["nodes"]),
            values=np.array(doc["values"]),
            betas=np.array(doc["betas"]),
            u=np.array(doc["u"]),
            v=np.array(doc["v"]),
            m=doc["m"],
            dmax=doc["dmax"],
        )
    if kind == "MARS":
        bases = tuple(
            MARSBasis(factors=tuple(HingeFactor(f["var"], f["knot"], f["positive"]) for f in fs))
            for fs in doc["bases"]
        )
        return MARSModel(
            bases=bases,
            coefficients=np.array(doc["coefficients"]),
            gcv=doc["gcv"],
            backward_gcvs=tuple(doc["backward_gcvs"]),
            forward_rss=tuple(doc["forward_rss"]),
        )
    if kind == "CGP":
        return CGPModel(
            x=np.array(doc["x"]),
            zio=np.array(doc["zio"], dtype=np.int64),
            zvm=np.array(doc["zvm"], dtype=np.int64),
            y=np.array(doc["y"]),
            mu=doc["mu"],
            sigma2=doc["sigma2"],
            theta=np.array(doc["theta"]),
            tau_io=np.array(doc["tau_io"]),
            tau_vm=np.array(doc["tau_vm"]),
            nugget=doc["nugget"],
            alpha=np.array(doc["alpha"]),
            loglik=doc["loglik"],
            restart_initial_logliks=tuple(doc["restart_initial_logliks"]),
            seed=doc["seed"],
        )
    raise VmapError(f"cannot deserialize model core of type {kind!r}")


def model_to_dict(model: SurrogateModel) -> dict:
    return {
        "spec": {
            "kind": model.spec.kind,
            "response_scale": model.spec.response_scale,
            "hyperparameters": dict(model.spec.hyperparameters),
        },
        "response": model.response,
        "key": None if model.key is None else vars(model.key),
        "io_mode": model.io_mode,
        "core": _core_to_dict(model.core),
    }


def model_from_dict(doc: dict) -> SurrogateModel:
    spec = ModelSpec(
        kind=doc["spec"]["kind"],
        response_scale=doc["spec"]["response_scale"],
        hyperparameters=doc["spec"].get("hyperparameters", {}),
    )
    key = doc.get("key")
    return SurrogateModel(
        spec=spec,
        response=doc["response"],
        key=None if key is None else VariabilityMapKey(**key),
        io_mode=doc.get("io_mode"),
        core=_core_from_dict(doc["core"]),
    )


def save_models(models: Sequence[SurrogateModel], path: str | Path) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "models": [model_to_dict(m) for m in models],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_models(path: str | Path) -> list[SurrogateModel]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT_NAME:
        raise VmapError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise VmapError(f"{path}: unsupported format version {doc.get('version')!r}")
    return [model_from_dict(d) for d in doc["models"]]
