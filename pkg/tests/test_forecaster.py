import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leakcast.errors import DataError, ModelError
from leakcast.forecaster import (MinMaxScaler, ModelConfig, ar_baseline, backward, checkpoint,
                                 fit_ar, fit_series, forward, init_model, loss, loss_grad,
                                 naive_baseline, predict_horizon, snap_embed_dim, temporal_embed,
                                 train)
from tests._longhand import forward_loops

GOLDEN = [0.09142938022169994, 0.4072224549852801, 0.8808505280440612, -0.8478109095252182]


def tiny_cfg(**kw):
    base = dict(embed_dim=8, num_heads=2, input_size=16, horizon=4, dropout=0.0, seed=7)
    base.update(kw)
    return ModelConfig(**base)


def perturbed(cfg, seed=99, scale=0.3):
    """Initial parameters plus noise so that every group, biases included, is non-trivial."""
    p = init_model(cfg)
    rng = np.random.default_rng(seed)
    for _, v in p.items():
        v += scale * rng.standard_normal(v.shape)
    return p


def window():
    return np.sin(np.arange(16) / 3.0) * 0.5 + 0.1


# -- configuration and initialisation -------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(embed_dim=8, num_heads=3)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ValueError):
        ModelConfig(reg_lambda=-1)


def test_snap_embed_dim():
    assert snap_embed_dim(32, 3) == 33
    assert snap_embed_dim(32, 4) == 32
    cfg = ModelConfig(embed_dim=snap_embed_dim(32, 3), num_heads=3, batch_size=17, learning_rate=9.77e-3,
                      dropout=0.143)
    init_model(cfg)


def test_init_is_deterministic():
    a, b = init_model(tiny_cfg()), init_model(tiny_cfg())
    for (name, x), (_, y) in zip(a.items(), b.items()):
        assert np.array_equal(x, y), name
    assert a.temporal.shape == (16, 8)


def test_temporal_embed_lookup():
    p = init_model(tiny_cfg())
    np.testing.assert_array_equal(temporal_embed(p, [0, 1, 2]), p.temporal[:3])
    p.temporal[:] = 0
    assert not temporal_embed(p, [3, 4]).any()
    with pytest.raises(IndexError):
        temporal_embed(p, [16])


# -- forward pass -----------------------------------------------------------------------


def test_forward_golden_vector():
    cfg = tiny_cfg()
    p = perturbed(cfg)
    pred, _ = forward(p, window(), cfg)
    np.testing.assert_allclose(pred, GOLDEN, rtol=0, atol=1e-12)
    np.testing.assert_allclose(forward_loops(p, window(), 2), GOLDEN, rtol=0, atol=1e-12)


def test_forward_matches_loops_with_gate_off():
    cfg = tiny_cfg(gate=False, num_heads=4)
    p = perturbed(cfg, seed=3)
    pred, _ = forward(p, window(), cfg)
    np.testing.assert_allclose(pred, forward_loops(p, window(), 4, gate=False), atol=1e-12)


def reference_attention(p, x, heads):
    """Plain scaled dot-product attention block: no time bias, no gate."""
    h = x[:, None] * p.token_w + p.token_b + p.temporal
    L, d = h.shape
    dk = d // heads
    q, k, v = h @ p.wq, h @ p.wk, h @ p.wv
    out = np.zeros_like(h)
    for i in range(heads):
        c = slice(i * dk, (i + 1) * dk)
        s = q[:, c] @ k[:, c].T / math.sqrt(dk)
        a = np.exp(s - s.max(axis=1, keepdims=True))
        out[:, c] = (a / a.sum(axis=1, keepdims=True)) @ v[:, c]
    r = h + out @ p.wo
    z = r + np.tanh(r @ p.ff_w1 + p.ff_b1) @ p.ff_w2 + p.ff_b2
    return z.mean(axis=0) @ p.readout_w + p.readout_b


def test_mechanism_off_reduction():
    cfg = tiny_cfg(gate=False)
    p = perturbed(cfg, seed=5)
    p.time_bias[:] = 0.0
    pred, _ = forward(p, window(), cfg)
    np.testing.assert_allclose(pred, reference_attention(p, window(), 2), rtol=0, atol=1e-10)


def test_zero_input_gives_readout_bias():
    cfg = tiny_cfg()
    p = perturbed(cfg)
    p.token_b[:] = 0
    p.temporal[:] = 0
    p.ff_b1[:] = 0
    p.ff_b2[:] = 0
    pred, _ = forward(p, np.zeros(16), cfg)
    np.testing.assert_allclose(pred, p.readout_b, atol=1e-15)


@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_attention_rows_normalised(seed, scale):
    cfg = tiny_cfg()
    p = perturbed(cfg, seed=seed)
    p.time_bias[:] = scale * np.random.default_rng(seed).standard_normal(p.time_bias.shape)
    _, trace = forward(p, window(), cfg)
    assert np.all(trace.attn >= 0)
    np.testing.assert_allclose(trace.attn.sum(axis=-1), 1.0, atol=1e-6)


def test_forward_batch_matches_single():
    cfg = tiny_cfg()
    p = perturbed(cfg)
    X = np.stack([window(), window()[::-1], np.zeros(16)])
    batch, _ = forward(p, X, cfg)
    for row, x in zip(batch, X):
        np.testing.assert_allclose(row, forward(p, x, cfg)[0], atol=1e-14)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_forward_errors():
    cfg = tiny_cfg()
    p = init_model(cfg)
    with pytest.raises(ValueError):
        forward(p, np.zeros(5), cfg)
    p.readout_w[:] = np.inf
    with pytest.raises(ModelError, match="readout"):
        forward(p, window(), cfg)


# -- loss and gradients ------------------------------------------------------------------


def test_loss_examples():
    p = init_model(tiny_cfg())
    assert loss(np.array([1.0, 2.0]), np.array([1.0, 2.0]), p, 0.0) == 0
    assert loss(np.array([1.0, 2.0]), np.zeros(2), p, 0.0) == 5.0
    p2 = init_model(ModelConfig(embed_dim=2, num_heads=1, input_size=4, horizon=2))
    p2.temporal[:] = 1.0
    assert abs(loss(np.zeros(2), np.zeros(2), p2, 0.1) - 0.8) < 1e-15
    with pytest.raises(ValueError):
        loss(np.zeros(2), np.zeros(3), p, 0.0)


def test_loss_monotone_in_lambda():
    p = perturbed(tiny_cfg())
    pred, target = np.ones(4), np.zeros(4)
    vals = [loss(pred, target, p, lam) for lam in (0.0, 0.01, 0.1, 1.0)]
    assert vals == sorted(vals)


def _objective(p, cfg, X, Y, lam, mask_seed):
    rng = np.random.default_rng(mask_seed) if cfg.dropout > 0 else None
    pred, trace = forward(p, X, cfg, train=cfg.dropout > 0, rng=rng)
    return loss(pred, Y, p, lam), pred, trace


def gradient_errors(cfg, lam, eps=1e-5):
    """Max relative error per parameter group against central differences."""
    p = perturbed(cfg, scale=0.2)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, cfg.input_size))
    Y = rng.standard_normal((3, cfg.horizon))
    _, pred, trace = _objective(p, cfg, X, Y, lam, 42)
    grads = backward(trace, p, loss_grad(pred, Y), cfg, lam)
    errors = {}
    for name, arr in p.items():
        g = getattr(grads, name)
        num = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = arr[i]
            arr[i] = old + eps
            up = _objective(p, cfg, X, Y, lam, 42)[0]
            arr[i] = old - eps
            down = _objective(p, cfg, X, Y, lam, 42)[0]
            arr[i] = old
            num[i] = (up - down) / (2 * eps)
        denom = max(np.linalg.norm(g), np.linalg.norm(num), 1e-12)
        errors[name] = np.linalg.norm(g - num) / denom
    return errors


def test_gradients_match_finite_differences():
    errors = gradient_errors(tiny_cfg(), lam=0.05)
    assert len(errors) == 16
    bad = {k: v for k, v in errors.items() if v > 1e-4}
    assert not bad, bad


def test_gradients_with_dropout_masks():
    errors = gradient_errors(tiny_cfg(dropout=0.2, embed_dim=4, num_heads=1, input_size=6, horizon=2),
                             lam=0.01)
    assert max(errors.values()) < 1e-4, errors


def test_zero_upstream_gradient():
    cfg = tiny_cfg()
    p = perturbed(cfg)
    pred, trace = forward(p, window(), cfg)
    g = backward(trace, p, np.zeros((1, 4)), cfg, 0.0)
    assert all(not v.any() for _, v in g.items())


def test_gradient_linear_in_residual():
    cfg = tiny_cfg()
    p = perturbed(cfg)
    X = np.stack([window(), window() * 0.5])
    Y = np.zeros((2, 4))
    pred, trace = forward(p, X, cfg)
    g1 = backward(trace, p, loss_grad(pred, Y), cfg, 0.0)
    g2 = backward(trace, p, loss_grad(pred, Y - (pred - Y)), cfg, 0.0)
    for (name, a), (_, b) in zip(g1.items(), g2.items()):
        np.testing.assert_allclose(b, 2 * a, atol=1e-10, err_msg=name)


# -- training ------------------------------------------------------------------------------


def train_windows(values, cfg):
    from leakcast.series import make_windows

    return make_windows(np.asarray(values, dtype=float), cfg.input_size, cfg.horizon)


def test_train_constant_series_converges():
    cfg = ModelConfig(embed_dim=8, num_heads=2, input_size=8, horizon=4, dropout=0.0, epochs=200,
                      learning_rate=3e-3, batch_size=16, anchor_last=False, seed=1)
    p = init_model(cfg)
    X, Y = train_windows(np.full(60, 0.6), cfg)
    train(p, (X, Y), cfg)
    pred, _ = forward(p, X, cfg)
    assert np.sqrt(np.mean((pred - Y) ** 2)) < 1e-3


def test_zero_learning_rate_leaves_params():
    cfg = tiny_cfg(learning_rate=0.0, epochs=3)
    p = init_model(cfg)
    before = p.copy()
    X, Y = train_windows(np.linspace(0, 1, 40), cfg)
    curve = train(p, (X, Y), cfg)
    for (name, a), (_, b) in zip(p.items(), before.items()):
        assert np.array_equal(a, b), name
    assert len(set(np.round(curve, 14))) == 1


def test_training_is_deterministic():
    cfg = tiny_cfg(epochs=4, dropout=0.1)
    X, Y = train_windows(np.sin(np.arange(80) / 4), cfg)
    a, b = init_model(cfg), init_model(cfg)
    assert train(a, (X, Y), cfg) == train(b, (X, Y), cfg)
    for (name, x), (_, y) in zip(a.items(), b.items()):
        assert np.array_equal(x, y), name


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch():
    cfg = tiny_cfg(epochs=5)
    p = init_model(cfg)
    X, Y = train_windows(np.linspace(0, 1e200, 60), cfg)
    with pytest.raises(ModelError, match="epoch"):
        train(p, (X, Y), cfg)


def test_ramp_forecast_continues():
    ramp = 0.01 * np.arange(200)
    cfg = ModelConfig(embed_dim=8, num_heads=2, input_size=10, horizon=5, dropout=0.0, epochs=60,
                      learning_rate=3e-3, batch_size=16, seed=2)
    model = fit_series(ramp[:150], cfg)
    pred = predict_horizon(model, ramp[140:150])
    assert np.sqrt(np.mean((pred - ramp[150:155]) ** 2)) < 0.05 * 0.01


def test_predict_is_repeatable_and_checks_length():
    cfg = tiny_cfg(epochs=2, dropout=0.3)
    model = fit_series(np.sin(np.arange(60) / 5), cfg)
    a = predict_horizon(model, window())
    np.testing.assert_array_equal(a, predict_horizon(model, window()))
    with pytest.raises(ValueError):
        predict_horizon(model, np.zeros(3))


def test_scaler_roundtrip_and_constant():
    s = MinMaxScaler.fit(np.array([2.0, 4.0, 3.0]))
    np.testing.assert_allclose(s.inverse(s.transform(np.array([2.5, 5.0]))), [2.5, 5.0])
    c = MinMaxScaler.fit(np.full(5, 1.5))
    assert np.all(np.isfinite(c.transform(np.full(3, 1.5))))
    np.testing.assert_allclose(c.inverse(c.transform(np.full(3, 1.5))), 1.5)


# -- baselines -------------------------------------------------------------------------------


def test_naive_baseline():
    np.testing.assert_array_equal(naive_baseline([1.0, 4.0, 7.0], 3), [7, 7, 7])
    with pytest.raises(ValueError):
        naive_baseline([], 2)


def test_ar1_geometric():
    x = 0.9 ** np.arange(30) * 5
    assert abs(fit_ar(x, 1)[0] - 0.9) < 1e-8
    np.testing.assert_allclose(ar_baseline(x, 1, 3), x[-1] * 0.9 ** np.arange(1, 4), rtol=1e-8)


def test_ar2_normal_equations():
    rng = np.random.default_rng(4)
    x = np.cumsum(rng.standard_normal(100))
    # regress x_t on (x_{t-1}, x_{t-2}) via the 2x2 normal equations
    Z = np.column_stack([x[1:-1], x[:-2]])
    oracle = np.linalg.solve(Z.T @ Z, Z.T @ x[2:])
    np.testing.assert_allclose(fit_ar(x, 2), oracle, atol=1e-10)


def test_ar_degenerate():
    with pytest.raises(np.linalg.LinAlgError):
        fit_ar(np.zeros(20), 2)
    with pytest.raises(ValueError):
        fit_ar(np.ones(3), 3)


# -- checkpoints ---------------------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    cfg = tiny_cfg(epochs=2)
    model = fit_series(np.sin(np.arange(60) / 5) + 2, cfg)
    checkpoint.save(model, tmp_path / "m.json")
    back = checkpoint.load(tmp_path / "m.json")
    assert back.cfg == model.cfg
    np.testing.assert_array_equal(predict_horizon(back, window()), predict_horizon(model, window()))


def test_checkpoint_version_mismatch(tmp_path):
    import json

    model = fit_series(np.sin(np.arange(60) / 5), tiny_cfg(epochs=1))
    doc = checkpoint.to_dict(model)
    doc["version"] = 99
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(DataError, match="version"):
        checkpoint.load(tmp_path / "m.json")
