from .baselines import ar_baseline, ar_forecast, fit_ar, naive_baseline
from .model import (ForwardTrace, ModelConfig, ModelParams, backward, forward, init_model, loss,
                    loss_grad, snap_embed_dim, temporal_embed)
from .training import MinMaxScaler, TrainedModel, fit_series, predict_horizon, train

__all__ = [
    "ForwardTrace", "MinMaxScaler", "ModelConfig", "ModelParams", "TrainedModel", "ar_baseline",
    "ar_forecast",
    "backward", "fit_ar", "fit_series", "forward", "init_model", "loss", "loss_grad",
    "naive_baseline", "predict_horizon", "snap_embed_dim", "temporal_embed", "train",
]
