"""Full model: wiring, fusion algebra, loss assembly, parameter audit,
checkpointing, and the no-future-exogenous inference mode."""

import numpy as np
import pytest

import dualcast.tensor as T
from dualcast import checkpoint
from dualcast.data import WindowedSample
from dualcast.model import ConfigError, DagConfig, DagModel, VariantSpec
from dualcast.tensor import ContractError

N_ENDO, N_EXO = 1, 2
LOOKBACK, HORIZON = 16, 4


def tiny_config(**kw):
    base = dict(n_endo=N_ENDO, n_exo=N_EXO, lookback=LOOKBACK, horizon=HORIZON,
                d_model=8, patch_len=8, seed=0)
    base.update(kw)
    return DagConfig(**base)


def sample(seed=0):
    rng = np.random.default_rng(seed)
    return WindowedSample(
        x_endo=rng.standard_normal((N_ENDO, LOOKBACK)),
        x_exo=rng.standard_normal((N_EXO, LOOKBACK)),
        y_endo=rng.standard_normal((N_ENDO, HORIZON)),
        y_exo=rng.standard_normal((N_EXO, HORIZON)),
        origin=0,
    )


def test_config_validation():
    with pytest.raises(ConfigError):
        tiny_config(lambda1=1.5)
    with pytest.raises(ConfigError):
        tiny_config(patch_len=32)
    with pytest.raises(ConfigError):
        tiny_config(horizon=0)


def test_config_defaults_fill_in():
    cfg = tiny_config()
    assert cfg.stride == cfg.patch_len
    assert cfg.d_ff == 4 * cfg.d_model
    assert cfg.d_gate == cfg.d_model


def test_forward_output_shapes():
    model = DagModel(tiny_config())
    out = model.forward(sample())
    assert out.y_endo_hat.shape == (N_ENDO, HORIZON)
    assert out.y_endo_ddot.shape == (N_ENDO, HORIZON)
    assert out.y_endo_dot.shape == (N_ENDO, HORIZON)
    assert out.y_exo_hat.shape == (N_EXO, HORIZON)
    assert out.x_endo_hat.shape == (N_ENDO, LOOKBACK)
    assert out.alphas_temporal.shape == (N_ENDO,)
    assert 0.0 < out.alpha_channel < 1.0
    assert set(out.losses) == {"l_t", "l_c", "l_f", "l_total"}


def test_named_parameters_unique_and_aliased_once():
    model = DagModel(tiny_config())
    names = [n for n, _ in model.named_parameters()]
    assert len(names) == len(set(names))
    assert "temporal.discovery.block0.w_q_prime" in names
    assert "channel.discovery.block0.w_k_prime" in names
    # aliased projections never appear under an injection-net name
    assert not any("injection" in n and n.endswith(("w_q_prime", "w_k_prime"))
                   for n in names)
    ids = [id(p) for _, p in model.named_parameters()]
    assert len(ids) == len(set(ids))


def test_loss_algebra_identity():
    model = DagModel(tiny_config(lambda2=0.7))
    out = model.forward(sample(1))
    lhs = out.losses["l_total"] - out.losses["l_f"]
    rhs = 0.7 * (out.losses["l_t"] + out.losses["l_c"])
    assert abs(lhs - rhs) < 1e-12


def test_lambda2_zero_collapses_to_forecast_loss():
    model = DagModel(tiny_config(lambda2=0.0))
    out = model.forward(sample(2))
    assert out.losses["l_total"] == out.losses["l_f"]


def test_fusion_endpoints_exact():
    s = sample(3)
    for lam1, attr in ((1.0, "y_endo_ddot"), (0.0, "y_endo_dot")):
        model = DagModel(tiny_config(lambda1=lam1))
        out = model.forward(s)
        assert np.array_equal(out.y_endo_hat, getattr(out, attr))


def test_fusion_convex_combination():
    model = DagModel(tiny_config(lambda1=0.3, normalize=False))
    out = model.forward(sample(4))
    expected = 0.3 * out.y_endo_ddot + 0.7 * out.y_endo_dot
    assert np.allclose(out.y_endo_hat, expected, atol=1e-12)


def test_all_parameters_reached_by_total_loss():
    model = DagModel(tiny_config())
    out = model.forward(sample(5))
    T.backward(out.total_loss)
    missing = [n for n, p in model.named_parameters() if p.grad is None]
    assert missing == []
    for _, p in model.named_parameters():
        p.grad = None


def test_variant_wiring_gradient_reach():
    # temporal-only without discovery: channel and discovery nets untouched
    model = DagModel(tiny_config())
    spec = VariantSpec(use_channel=False, temporal_discovery=False,
                       channel_discovery=False, alpha_override=1.0,
                       lambda1_override=1.0)
    out = model.forward(sample(6), spec)
    assert "l_t" not in out.losses and "l_c" not in out.losses
    T.backward(out.total_loss)
    reached = {n for n, p in model.named_parameters() if p.grad is not None}
    assert all(n.startswith("temporal.injection") for n in reached)
    assert not any("gate" in n for n in reached)
    for _, p in model.named_parameters():
        p.grad = None


def test_variant_rejects_disabling_both_paths():
    with pytest.raises(ConfigError):
        VariantSpec(use_temporal=False, use_channel=False)


def test_channel_path_requires_future_exogenous():
    model = DagModel(tiny_config())
    s = sample(7)
    broken = WindowedSample(x_endo=s.x_endo, x_exo=s.x_exo, y_endo=s.y_endo,
                            y_exo=None, origin=0)
    with pytest.raises(ContractError):
        model.forward(broken)


def test_forward_shape_contract():
    model = DagModel(tiny_config())
    s = sample(8)
    bad = WindowedSample(x_endo=s.x_endo[:, :8], x_exo=s.x_exo, y_endo=s.y_endo,
                         y_exo=s.y_exo, origin=0)
    with pytest.raises(T.ShapeError):
        model.forward(bad)


def test_same_seed_same_model():
    a = DagModel(tiny_config())
    b = DagModel(tiny_config())
    for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb
        assert np.array_equal(pa.data, pb.data)
    s = sample(9)
    assert np.array_equal(a.predict(s), b.predict(s))


def test_predict_without_future_exo_is_substitution(tmp_path):
    model = DagModel(tiny_config())
    s = sample(10)
    blind = model.predict_without_future_exo(s)
    # manual substitution: forecast the exogenous future, then run normally
    with T.no_grad():
        out = model.forward(s)
    from dataclasses import replace
    substituted = replace(s, y_exo=out.y_exo_hat, y_endo=None)
    assert np.array_equal(blind, model.predict(substituted))


def test_checkpoint_roundtrip_bitwise(tmp_path):
    model = DagModel(tiny_config(seed=5))
    for _, p in model.named_parameters():
        p.data += np.random.default_rng(0).standard_normal(p.shape) * 0.01
    path = tmp_path / "model.bin"
    checkpoint.save(path, model, run_config={"data.split": "7:1:2"})
    loaded, run_cfg = checkpoint.load(path)
    assert run_cfg == {"data.split": "7:1:2"}
    assert loaded.config == model.config
    for (n1, p1), (n2, p2) in zip(model.named_parameters(), loaded.named_parameters()):
        assert n1 == n2
        assert np.array_equal(p1.data, p2.data)
    s = sample(11)
    assert np.array_equal(model.predict(s), loaded.predict(s))


def test_checkpoint_detects_corruption(tmp_path):
    model = DagModel(tiny_config())
    path = tmp_path / "model.bin"
    checkpoint.save(path, model)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(checkpoint.CheckpointError, match="checksum"):
        checkpoint.load(path)


def test_checkpoint_rejects_wrong_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a checkpoint at all, " + b"\x00" * 64)
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load(path)
