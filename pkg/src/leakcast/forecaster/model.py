"""Time-aware attention forecaster: parameters, forward pass, loss and gradients.

One attention block over the input window:

    h_i  = E(x_i) + T_i                     token lift plus temporal embedding
    h'_i = G_i * h_i,  G_i = sigmoid(T_i . u + c)
    A    = softmax(Q K^T / sqrt(d_k) + W_T) per head
    r    = h' + concat_heads(A V) W_o
    z    = r + FF(r)
    y    = mean_i(z_i) W_r + b_r             one output per horizon step

All arrays are float64 and every operation is batched over the leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import ModelError

PARAM_NAMES = (
    "token_w", "token_b", "temporal", "gate_w", "gate_b",
    "wq", "wk", "wv", "wo", "time_bias",
    "ff_w1", "ff_b1", "ff_w2", "ff_b2",
    "readout_w", "readout_b",
)


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    num_heads: int = 4
    input_size: int = 20
    horizon: int = 20
    dropout: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 300
    reg_lambda: float = 1e-4
    seed: int = 0
    ff_mult: int = 2
    gate: bool = True
    time_bias_alpha: float = 0.01
    anchor_last: bool = True

    def __post_init__(self):
        problems = []
        for name in ("embed_dim", "num_heads", "input_size", "horizon", "batch_size", "epochs", "ff_mult"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be a positive integer")
        if self.embed_dim % max(self.num_heads, 1):
            problems.append(f"embed_dim={self.embed_dim} is not divisible by num_heads={self.num_heads}")
        if not 0.0 <= self.dropout < 1.0:
            problems.append("dropout must lie in [0, 1)")
        if self.learning_rate < 0:
            problems.append("learning_rate must be non-negative")
        if self.reg_lambda < 0:
            problems.append("reg_lambda must be non-negative")
        if self.seed < 0:
            problems.append("seed must be unsigned")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def head_dim(self):
        return self.embed_dim // self.num_heads


def snap_embed_dim(base, heads):
    """Smallest multiple of ``heads`` that is at least ``base``."""
    return int(heads * math.ceil(base / heads))


@dataclass
class ModelParams:
    token_w: np.ndarray
    token_b: np.ndarray
    temporal: np.ndarray
    gate_w: np.ndarray
    gate_b: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    time_bias: np.ndarray
    ff_w1: np.ndarray
    ff_b1: np.ndarray
    ff_w2: np.ndarray
    ff_b2: np.ndarray
    readout_w: np.ndarray
    readout_b: np.ndarray

    def items(self):
        return ((f.name, getattr(self, f.name)) for f in fields(self))

    def copy(self):
        return ModelParams(**{k: v.copy() for k, v in self.items()})

    def zeros_like(self):
        return ModelParams(**{k: np.zeros_like(v) for k, v in self.items()})

    def all_finite(self):
        return all(np.all(np.isfinite(v)) for _, v in self.items())


@dataclass
class ForwardTrace:
    """Activations kept for the backward pass."""

    x: np.ndarray
    h: np.ndarray
    gate: np.ndarray
    h2: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    attn: np.ndarray
    attn_mask: np.ndarray | None
    heads_out: np.ndarray
    r: np.ndarray
    ff_act: np.ndarray
    ff_mask: np.ndarray | None
    pooled: np.ndarray
    gate_enabled: bool = True
    keep_scale: float = 1.0
    extra: dict = field(default_factory=dict)


def init_model(cfg):
    """Deterministic initialisation from ``cfg.seed``.

    Matrices are uniform in +-1/sqrt(fan_in); the temporal table is
    N(0, 0.01^2); the time bias starts as the recency prior
    -alpha * |i - j|; biases start at zero.
    """
    if cfg.embed_dim % cfg.num_heads:
        raise ValueError(f"embed_dim={cfg.embed_dim} is not divisible by num_heads={cfg.num_heads}")
    rng = np.random.default_rng(cfg.seed)
    d, L, O = cfg.embed_dim, cfg.input_size, cfg.horizon
    F = cfg.ff_mult * d

    def uni(fan_in, *shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    idx = np.arange(L)
    return ModelParams(
        token_w=uni(1, d),
        token_b=np.zeros(d),
        temporal=0.01 * rng.standard_normal((L, d)),
        gate_w=uni(d, d),
        gate_b=np.zeros(1),
        wq=uni(d, d, d),
        wk=uni(d, d, d),
        wv=uni(d, d, d),
        wo=uni(d, d, d),
        time_bias=-cfg.time_bias_alpha * np.abs(idx[:, None] - idx[None, :]).astype(float),
        ff_w1=uni(d, d, F),
        ff_b1=np.zeros(F),
        ff_w2=uni(F, F, d),
        ff_b2=np.zeros(d),
        readout_w=uni(d, d, O),
        readout_b=np.zeros(O),
    )


def temporal_embed(params, positions):
    positions = np.asarray(positions, dtype=int)
    L = params.temporal.shape[0]
    if positions.size and (positions.min() < 0 or positions.max() >= L):
        raise IndexError(f"temporal positions must lie in [0, {L})")
    return params.temporal[positions]


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _split_heads(m, heads):
    B, L, d = m.shape
    return m.reshape(B, L, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(m):
    B, H, L, dk = m.shape
    return m.transpose(0, 2, 1, 3).reshape(B, L, H * dk)


def _flat(m):
    return m.reshape(-1, m.shape[-1])


def _check(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"non-finite activation in layer {name!r}")


def forward(params, window, cfg, *, train=False, rng=None):
    """Predict the horizon for one window (1-D) or a batch of windows (2-D).

    Dropout on attention weights and feed-forward activations is active only
    when ``train`` is true, with masks drawn from ``rng``.
    """
    x = np.asarray(window, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.temporal.shape[0]:
        raise ValueError(f"window length {x.shape[1]} does not match input_size {params.temporal.shape[0]}")
    H = cfg.num_heads
    dk = params.wq.shape[0] // H
    p = cfg.dropout if train else 0.0
    if p > 0 and rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = 1.0 - p

    h = x[:, :, None] * params.token_w + params.token_b + params.temporal[None]
    if cfg.gate:
        gate = _sigmoid(params.temporal @ params.gate_w + params.gate_b[0])
    else:
        gate = np.ones(x.shape[1])
    h2 = gate[None, :, None] * h
    _check("embedding", h2)

    q = _split_heads(h2 @ params.wq, H)
    k = _split_heads(h2 @ params.wk, H)
    v = _split_heads(h2 @ params.wv, H)
    scores = q @ k.transpose(0, 1, 3, 2) / math.sqrt(dk) + params.time_bias
    scores = scores - scores.max(axis=-1, keepdims=True)
    attn = np.exp(scores)
    attn /= attn.sum(axis=-1, keepdims=True)
    attn_mask = (rng.random(attn.shape) < keep) / keep if p > 0 else None
    attn_used = attn * attn_mask if attn_mask is not None else attn
    heads_out = _merge_heads(attn_used @ v)
    r = h2 + heads_out @ params.wo
    _check("attention", r)

    ff_act = np.tanh(r @ params.ff_w1 + params.ff_b1)
    ff_mask = (rng.random(ff_act.shape) < keep) / keep if p > 0 else None
    ff_used = ff_act * ff_mask if ff_mask is not None else ff_act
    z = r + ff_used @ params.ff_w2 + params.ff_b2
    pooled = z.mean(axis=1)
    pred = pooled @ params.readout_w + params.readout_b
    _check("readout", pred)

    trace = ForwardTrace(x=x, h=h, gate=gate, h2=h2, q=q, k=k, v=v, attn=attn,
                         attn_mask=attn_mask, heads_out=heads_out, r=r, ff_act=ff_act,
                         ff_mask=ff_mask, pooled=pooled, gate_enabled=cfg.gate)
    return (pred[0] if single else pred), trace


def loss(pred, target, params, reg_lambda):
    """Sum of squared horizon errors (averaged over a batch) plus lambda * ||T||_F^2."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    err = pred - target
    data = np.sum(err**2, axis=-1)
    data = float(np.mean(data)) if err.ndim > 1 else float(data)
    return data + reg_lambda * float(np.sum(params.temporal**2))


def loss_grad(pred, target):
    """Gradient of the data term with respect to a batch of predictions."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    return 2.0 * (pred - target) / pred.shape[0]


def backward(trace, params, grad_out, cfg, reg_lambda=0.0):
    """Reverse-mode gradients of ``sum(grad_out * pred) + reg_lambda * ||T||^2``."""
    g_pred = np.asarray(grad_out, dtype=float)
    if g_pred.ndim == 1:
        g_pred = g_pred[None, :]
    if g_pred.shape[0] != trace.x.shape[0] or trace.h.shape[1:] != params.temporal.shape:
        raise ValueError("trace does not match these parameters / upstream gradient")
    H = cfg.num_heads
    B, L, d = trace.h.shape
    dk = d // H
    g = params.zeros_like()

    g.readout_w = trace.pooled.T @ g_pred
    g.readout_b = g_pred.sum(axis=0)
    g_pooled = g_pred @ params.readout_w.T
    g_z = np.broadcast_to(g_pooled[:, None, :] / L, (B, L, d))

    ff_used = trace.ff_act * trace.ff_mask if trace.ff_mask is not None else trace.ff_act
    g.ff_w2 = _flat(ff_used).T @ _flat(g_z)
    g.ff_b2 = g_z.sum(axis=(0, 1))
    g_act = g_z @ params.ff_w2.T
    if trace.ff_mask is not None:
        g_act = g_act * trace.ff_mask
    g_pre = g_act * (1.0 - trace.ff_act**2)
    g.ff_w1 = _flat(trace.r).T @ _flat(g_pre)
    g.ff_b1 = g_pre.sum(axis=(0, 1))
    g_r = g_z + g_pre @ params.ff_w1.T

    g.wo = _flat(trace.heads_out).T @ _flat(g_r)
    g_heads = _split_heads(g_r @ params.wo.T, H)
    attn_used = trace.attn * trace.attn_mask if trace.attn_mask is not None else trace.attn
    g_v = attn_used.transpose(0, 1, 3, 2) @ g_heads
    g_attn = g_heads @ trace.v.transpose(0, 1, 3, 2)
    if trace.attn_mask is not None:
        g_attn = g_attn * trace.attn_mask
    g_scores = trace.attn * (g_attn - np.sum(g_attn * trace.attn, axis=-1, keepdims=True))
    g.time_bias = g_scores.sum(axis=(0, 1))
    g_q = _merge_heads(g_scores @ trace.k) / math.sqrt(dk)
    g_k = _merge_heads(g_scores.transpose(0, 1, 3, 2) @ trace.q) / math.sqrt(dk)
    g_v = _merge_heads(g_v)

    h2 = trace.h2
    g.wq = _flat(h2).T @ _flat(g_q)
    g.wk = _flat(h2).T @ _flat(g_k)
    g.wv = _flat(h2).T @ _flat(g_v)
    g_h2 = g_r + g_q @ params.wq.T + g_k @ params.wk.T + g_v @ params.wv.T

    gate = trace.gate
    g_h = g_h2 * gate[None, :, None]
    g.temporal = g_h.sum(axis=0)
    if trace.gate_enabled:
        g_gate = np.sum(g_h2 * trace.h, axis=(0, 2))
        g_a = g_gate * gate * (1.0 - gate)
        g.gate_w = params.temporal.T @ g_a
        g.gate_b = np.array([g_a.sum()])
        g.temporal = g.temporal + np.outer(g_a, params.gate_w)
    g.token_w = trace.x.reshape(-1) @ _flat(g_h)
    g.token_b = g_h.sum(axis=(0, 1))
    if reg_lambda:
        g.temporal = g.temporal + 2.0 * reg_lambda * params.temporal
    return g
