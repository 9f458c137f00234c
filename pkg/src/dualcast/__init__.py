"""Dual-path causal forecasting with exogenous variables.

Two discovery networks learn how exogenous history predicts the exogenous
future (temporal) and the endogenous history (channel); their attention
projections are injected, under a learned gate, into two forecasting
networks whose predictions are fused into the final endogenous forecast.
"""

from .data import RawDataset, SyntheticSpec, WindowedSample, gen_synthetic, load_csv
from .model import DagConfig, DagModel, ForwardOutputs, VariantSpec
from .tensor import Parameter, Tensor, backward, no_grad
from .training import (
    AblationVariant,
    DagTrainable,
    EvalReport,
    MlpFusionBaseline,
    TrainConfig,
    evaluate,
    make_bundle,
    run_ablation,
    run_baseline_mlp_fusion,
    train,
)

__all__ = [
    "AblationVariant",
    "DagConfig",
    "DagModel",
    "DagTrainable",
    "EvalReport",
    "ForwardOutputs",
    "MlpFusionBaseline",
    "Parameter",
    "RawDataset",
    "SyntheticSpec",
    "Tensor",
    "TrainConfig",
    "VariantSpec",
    "WindowedSample",
    "backward",
    "evaluate",
    "gen_synthetic",
    "load_csv",
    "make_bundle",
    "no_grad",
    "run_ablation",
    "run_baseline_mlp_fusion",
    "train",
]

__version__ = "0.1.0"
