"""Distributional regression networks trained with multivariate scores."""
from .evaluation import METRICS, MetricRow, climatology_prediction, evaluate, evaluate_predictions
from .losses import loss_ccrps_t0, loss_es_ensemble, loss_mle_biv
from .network import NetworkConfig, decode, forward, init_params
from .training import Model, TrainReport, TrainingDivergence, should_stop, train

__all__ = [
    "METRICS", "MetricRow", "Model", "NetworkConfig", "TrainReport", "TrainingDivergence",
    "climatology_prediction", "decode", "evaluate", "evaluate_predictions", "forward",
    "init_params", "loss_ccrps_t0", "loss_es_ensemble", "loss_mle_biv", "should_stop", "train",
]
