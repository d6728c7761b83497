from .bart import BARTModel, BARTParams, fit_bart
from .cv import CVResult, EvalReport, cross_validate, evaluate
from .gbt import GBTModel, GBTParams, fit_gbt
from .linear import (
    LinearModel,
    StandardizationParams,
    fit_lasso,
    fit_ridge,
    lasso_kkt_residuals,
    lasso_lambda_max,
    standardize_apply,
    standardize_fit,
)
from .serialize import load_model, save_model

__all__ = [
    "BARTModel",
    "BARTParams",
    "CVResult",
    "EvalReport",
    "GBTModel",
    "GBTParams",
    "LinearModel",
    "StandardizationParams",
    "cross_validate",
    "evaluate",
    "fit_bart",
    "fit_gbt",
    "fit_lasso",
    "fit_ridge",
    "lasso_kkt_residuals",
    "lasso_lambda_max",
    "load_model",
    "save_model",
    "standardize_apply",
    "standardize_fit",
]
