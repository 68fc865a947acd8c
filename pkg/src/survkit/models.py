"""Uniform fit / score / serialize entry points over the five model kinds."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import cox, deepsurv, forest, ksvm, mtlr
from .data import ScalingParams
from .errors import ValidationError

MODEL_NAMES = ("cox", "mtlr", "rsf", "deepsurv", "ksvm")


@dataclass
class ModelOptions:
    """Hyperparameters for every model kind; defaults are the documented ones."""

    seed: int = 0
    cox_ties: str = "efron"
    cox_ridge: float = 0.0
    mtlr_bins: int = 10
    mtlr_reg_c: float = 1.0
    rsf_trees: int = 200
    rsf_mtry: int | None = None
    rsf_min_node_events: int = 3
    rsf_max_depth: int | None = None
    ds_hidden: tuple = (16, 16)
    ds_activation: str = "relu"
    ds_lr: float = 1e-2
    ds_epochs: int = 2000
    ds_weight_decay: float = 1e-4
    ksvm_kernel: str = "rbf"
    ksvm_gamma: float | None = None
    ksvm_degree: int = 3
    ksvm_coef0: float = 1.0
    ksvm_c: float = 1.0
    ksvm_epochs: int = 500


def fit_model(name: str, train, opts: ModelOptions | None = None):
    opts = opts or ModelOptions()
    if name == "cox":
        return cox.fit_cox(train, cox.CoxConfig(ties=opts.cox_ties, ridge=opts.cox_ridge))
    if name == "mtlr":
        grid = mtlr.make_time_grid(train, opts.mtlr_bins)
        return mtlr.fit_mtlr(train, grid, opts.mtlr_reg_c)
    if name == "rsf":
        return forest.fit_rsf(train, forest.RSFConfig(
            opts.rsf_trees, opts.rsf_mtry, opts.rsf_min_node_events, opts.rsf_max_depth, opts.seed))
    if name == "deepsurv":
        spec = deepsurv.NetworkSpec(opts.ds_hidden, opts.ds_activation, opts.ds_weight_decay,
                                    opts.ds_lr, opts.ds_epochs, opts.seed)
        return deepsurv.fit_deepsurv(train, spec)
    if name == "ksvm":
        kernel = ksvm.KernelSpec(opts.ksvm_kernel, opts.ksvm_gamma, opts.ksvm_degree, opts.ksvm_coef0)
        return ksvm.fit_ksvm(train, kernel, opts.ksvm_c, ksvm.KSVMConfig(opts.ksvm_epochs, opts.seed))
    raise ValidationError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


def model_name(model) -> str:
    return {
        cox.CoxModel: "cox",
        mtlr.MTLRModel: "mtlr",
        forest.RSFModel: "rsf",
        deepsurv.DeepSurvModel: "deepsurv",
        ksvm.KSVMModel: "ksvm",
    }[type(model)]


def scorer(model):
    """Map a covariate matrix to risk scores (higher = earlier event)."""
    kind = model_name(model)
    if kind == "cox":
        return lambda X: cox.risk_scores(model, X)
    if kind == "mtlr":
        return lambda X: mtlr.risk_scores_mtlr(model, X)
    if kind == "rsf":
        return lambda X: forest.risk_scores_rsf(model, X)
    if kind == "deepsurv":
        return lambda X: deepsurv.risk_scores_ds(model, X)
    return lambda X: ksvm.scores_ksvm(model, X)


_LOADERS = {
    "cox": cox.CoxModel.from_dict,
    "mtlr": mtlr.MTLRModel.from_dict,
    "rsf": forest.RSFModel.from_dict,
    "deepsurv": deepsurv.DeepSurvModel.from_dict,
    "ksvm": ksvm.KSVMModel.from_dict,
}


def model_to_json(model, scaling: ScalingParams | None = None) -> str:
    d = model.to_dict()
    if scaling is not None:
        d["scaling"] = scaling.to_dict()
    return json.dumps(d, indent=1) + "\n"


def save_model(path, model, scaling: ScalingParams | None = None) -> None:
    Path(path).write_text(model_to_json(model, scaling), encoding="utf-8")


def load_model(path):
    """Read an artifact; returns ``(model, scaling_or_None)``."""
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a JSON model artifact ({exc})") from None
    kind = d.get("model")
    if kind not in _LOADERS:
        raise ValidationError(f"{path}: unknown model kind {kind!r}")
    if d.get("version") != 1:
        raise ValidationError(f"{path}: unsupported artifact version {d.get('version')!r}")
    scaling = ScalingParams.from_dict(d["scaling"]) if "scaling" in d else None
    return _LOADERS[kind](d), scaling
