"""Distortion (Choquet) risk measures of losses exposed to random environments."""

__version__ = "0.1.0"

from .background import JointLossModel, SmoothConcaveG, sandwich_check, tsanakas_gamma
from .choquet import Capacity, choquet_capacity, choquet_distorted, distort_probability, is_submodular
from .classical import LevelMeasure, avar, rvar, var, wvar
from .distortion import DistortionFn, StateFamilyRule, eval_distortion, is_concave, resolve_state
from .envmeasure import EnvMeasureSpec, RiskProfile, env_risk, inner_risk, risk_profile
from .model import (
    Binning,
    ConditionalModel,
    DiscreteDistribution,
    ScenarioTable,
    build_conditional_model,
    build_distribution,
    check_comonotone,
    survival,
)

__all__ = [
    "Binning",
    "Capacity",
    "ConditionalModel",
    "DiscreteDistribution",
    "DistortionFn",
    "EnvMeasureSpec",
    "JointLossModel",
    "LevelMeasure",
    "RiskProfile",
    "ScenarioTable",
    "SmoothConcaveG",
    "StateFamilyRule",
    "avar",
    "build_conditional_model",
    "build_distribution",
    "check_comonotone",
    "choquet_capacity",
    "choquet_distorted",
    "distort_probability",
    "env_risk",
    "eval_distortion",
    "inner_risk",
    "is_concave",
    "is_submodular",
    "resolve_state",
    "risk_profile",
    "rvar",
    "sandwich_check",
    "survival",
    "tsanakas_gamma",
    "var",
    "wvar",
]
