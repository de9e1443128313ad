"""Restricted Boltzmann machines, deep belief networks and seven DBN-based
classification training strategies, with brute-force oracles for checking
every derivative at small scale."""

from .classifier import ClassifierParams, LabeledDataset, Net, backward, forward_loss, predict
from .dbn import DbnParams, init_dbn, log_px_approx, pretrain_layerwise, propagate, top_conditional
from .hyper import Hyper, RunHistory
from .numerics import RngStream, matmul, sigmoid, softmax
from .rbm import (
    RbmGrad,
    RbmParams,
    cd_k_grad,
    energy,
    exact_log_px,
    exact_nll_grad,
    exact_partition,
    prob_h_given_x,
    prob_x_given_h,
)
from .strategies import (
    BoxConstraint,
    Schedule,
    Splits,
    StrategyId,
    TrainedModel,
    bl_penalty,
    box_project,
    expected_loss,
    objective_dbn_plus_loss,
    objective_two_phase,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BoxConstraint",
    "ClassifierParams",
    "DbnParams",
    "Hyper",
    "LabeledDataset",
    "Net",
    "RbmGrad",
    "RbmParams",
    "RngStream",
    "RunHistory",
    "Schedule",
    "Splits",
    "StrategyId",
    "TrainedModel",
    "backward",
    "bl_penalty",
    "box_project",
    "cd_k_grad",
    "energy",
    "exact_log_px",
    "exact_nll_grad",
    "exact_partition",
    "expected_loss",
    "forward_loss",
    "init_dbn",
    "log_px_approx",
    "matmul",
    "objective_dbn_plus_loss",
    "objective_two_phase",
    "predict",
    "pretrain_layerwise",
    "prob_h_given_x",
    "prob_x_given_h",
    "propagate",
    "sigmoid",
    "softmax",
    "top_conditional",
    "train",
]
