"""Mini-batch Adam training, min-max normalisation and horizon prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError
from .model import ModelParams, backward, forward, init_model, loss, loss_grad

logger = logging.getLogger(__name__)

BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass(frozen=True)
class MinMaxScaler:
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def fit(cls, values):
        values = np.asarray(values, dtype=float)
        lo, hi = float(values.min()), float(values.max())
        if hi - lo <= 0:
            # constant training data: shift only
            hi = lo + 1.0
        return cls(lo, hi)

    def transform(self, v):
        return (np.asarray(v, dtype=float) - self.lo) / (self.hi - self.lo)

    def inverse(self, v):
        return np.asarray(v, dtype=float) * (self.hi - self.lo) + self.lo


@dataclass
class TrainedModel:
    cfg: object
    params: ModelParams
    scaler: MinMaxScaler = field(default_factory=MinMaxScaler)
    loss_curve: list = field(default_factory=list)


class _Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - BETA1**self.t
        c2 = 1.0 - BETA2**self.t
        for name, p in params.items():
            g = getattr(grads, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def train(params, windows, cfg, *, rng=None):
    """Fit ``params`` in place on ``windows = (inputs, targets)``; returns the per-epoch mean loss.

    Inputs and targets must already be on the model's (normalised) scale.
    Shuffling and dropout draw from ``rng``, seeded from ``cfg.seed`` when
    omitted, so a run is fully determined by (seed, config, data).
    """
    X, Y = (np.asarray(a, dtype=float) for a in windows)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one training window")
    if X.shape[0] != Y.shape[0] or Y.shape[1] != cfg.horizon or X.shape[1] != cfg.input_size:
        raise ValueError(f"windows of shape {X.shape} -> {Y.shape} do not match the config")
    rng = np.random.default_rng([cfg.seed, 1]) if rng is None else rng
    opt = _Adam(params, cfg.learning_rate)
    curve = []
    n = X.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                pred, trace = forward(params, X[idx], cfg, train=True, rng=rng)
            except ModelError as exc:
                raise ModelError(f"training diverged in epoch {epoch}: {exc}") from None
            batch_loss = loss(pred, Y[idx], params, cfg.reg_lambda)
            if not np.isfinite(batch_loss):
                raise ModelError(f"training diverged in epoch {epoch}: loss is not finite")
            grads = backward(trace, params, loss_grad(pred, Y[idx]), cfg, cfg.reg_lambda)
            if cfg.learning_rate > 0:
                opt.step(params, grads)
            total += batch_loss * idx.size
        curve.append(total / n)
        if not params.all_finite():
            raise ModelError(f"training diverged in epoch {epoch}: parameters became non-finite")
    logger.debug("trained %d epochs, final loss %.3g", cfg.epochs, curve[-1] if curve else float("nan"))
    return curve


def anchor(X, Y=None):
    """Express windows relative to their last input sample."""
    level = X[..., -1:]
    return (X - level, None if Y is None else Y - level), level


def fit_series(train_values, cfg, *, normalize=True):
    """Initialise, normalise on the training values and train on every window of them.

    With ``cfg.anchor_last`` each window and its target are shifted by the
    window's last (normalised) value, so the network learns increments and
    a trending level outside the training range stays forecastable.
    """
    from ..series import make_windows

    scaler = MinMaxScaler.fit(train_values) if normalize else MinMaxScaler()
    X, Y = make_windows(scaler.transform(train_values), cfg.input_size, cfg.horizon)
    if cfg.anchor_last:
        (X, Y), _ = anchor(X, Y)
    params = init_model(cfg)
    curve = train(params, (X, Y), cfg)
    return TrainedModel(cfg=cfg, params=params, scaler=scaler, loss_curve=curve)


def predict_horizon(model, series_tail):
    """Inference-mode forecast of ``cfg.horizon`` steps from the last ``input_size`` samples.

    Accepts a single tail (1-D) or a batch of tails (2-D); results are on the
    original scale.
    """
    tail = np.asarray(series_tail, dtype=float)
    if tail.shape[-1] != model.cfg.input_size:
        raise ValueError(f"tail length {tail.shape[-1]} does not match input_size {model.cfg.input_size}")
    x = model.scaler.transform(tail)
    level = 0.0
    if model.cfg.anchor_last:
        (x, _), level = anchor(x)
    pred, _ = forward(model.params, x, model.cfg, train=False)
    return model.scaler.inverse(pred + level)
