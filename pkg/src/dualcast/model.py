"""Full dual-causal forecaster: assembles the four networks, fuses the two
endogenous predictions, and computes the composite training loss.

All computation runs in per-window normalized space when `normalize` is on
(z-score from lookback statistics); reported predictions are de-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .channel import ChannelDiscoveryNet, ChannelInjectionNet
from .data import NormStats, WindowedSample
from .embedding import PatchGeometry
from .temporal import TemporalDiscoveryNet, TemporalInjectionNet
from .tensor import ContractError, Tensor


class ConfigError(ValueError):
    pass


@dataclass
class DagConfig:
    n_endo: int
    n_exo: int
    lookback: int
    horizon: int
    d_model: int = 16
    patch_len: int = 16
    stride: int | None = None  # None -> non-overlapping (= patch_len)
    n_layers: int = 1
    n_heads: int = 1
    d_ff: int | None = None  # None -> 4 * d_model
    d_gate: int | None = None  # None -> d_model
    lambda1: float = 0.5
    lambda2: float = 0.5
    double_softmax: bool = True
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.stride is None:
            self.stride = self.patch_len
        if self.d_ff is None:
            self.d_ff = 4 * self.d_model
        if self.d_gate is None:
            self.d_gate = self.d_model
        for name in ("n_endo", "n_exo", "lookback", "horizon", "d_model",
                     "patch_len", "stride", "n_layers", "n_heads", "d_ff", "d_gate"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.lambda1 <= 1.0:
            raise ConfigError(f"lambda1 {self.lambda1} outside [0, 1]")
        if self.lambda2 < 0.0:
            raise ConfigError(f"lambda2 {self.lambda2} must be nonnegative")
        if self.patch_len > self.lookback:
            raise ConfigError(
                f"patch_len {self.patch_len} exceeds lookback {self.lookback}"
            )

    @property
    def geometry(self) -> PatchGeometry:
        return PatchGeometry(self.lookback, self.patch_len, self.stride)


@dataclass(frozen=True)
class VariantSpec:
    """Which sub-networks run and how the gates/fusion behave.

    Used by the ablation harness; `VariantSpec()` is the full model.
    """

    use_temporal: bool = True
    use_channel: bool = True
    temporal_discovery: bool = True
    channel_discovery: bool = True
    alpha_override: float | None = None
    lambda1_override: float | None = None

    def __post_init__(self):
        if not self.use_temporal and not self.use_channel:
            raise ConfigError("variant disables both prediction paths")


FULL = VariantSpec()


@dataclass
class ForwardOutputs:
    y_endo_hat: np.ndarray  # fused prediction [N x F], original scale
    y_endo_ddot: np.ndarray | None  # temporal-injection path [N x F]
    y_endo_dot: np.ndarray | None  # channel-injection path [N x F]
    y_exo_hat: np.ndarray | None  # [D x F]
    x_endo_hat: np.ndarray | None  # [N x T]
    alphas_temporal: np.ndarray | None  # [N]
    alpha_channel: float | None
    losses: dict = field(default_factory=dict)  # float values per term
    total_loss: Tensor | None = None  # graph node, present when targets given


class DagModel:
    def __init__(self, config: DagConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        c = config
        geom = c.geometry
        self.temporal_discovery = TemporalDiscoveryNet(
            rng, geom, c.d_model, c.d_ff, c.n_heads, c.horizon, c.n_layers
        )
        self.temporal_injection = TemporalInjectionNet(
            rng, self.temporal_discovery, geom, c.d_model, c.d_ff,
            c.n_heads, c.d_gate, c.lookback, c.horizon,
        )
        self.channel_discovery = ChannelDiscoveryNet(
            rng, c.n_exo, c.n_endo, c.lookback, c.d_model, c.d_ff, c.n_heads, c.n_layers
        )
        self.channel_injection = ChannelInjectionNet(
            rng, self.channel_discovery, c.n_exo, c.n_endo,
            c.lookback, c.horizon, c.d_model, c.d_ff, c.n_heads, c.d_gate,
        )
        self._named = self._collect_named()

    def _collect_named(self):
        seen_ids = {}
        names = set()
        out = []
        nets = [self.temporal_discovery, self.temporal_injection,
                self.channel_discovery, self.channel_injection]
        for net in nets:
            for p in net.parameters():
                if id(p) in seen_ids:
                    continue
                if p.name in names:
                    raise ContractError(f"duplicate parameter name {p.name!r}")
                seen_ids[id(p)] = p
                names.add(p.name)
                out.append((p.name, p))
        return out

    def named_parameters(self):
        """Every trainable parameter exactly once; injected (aliased)
        projections appear under their discovery-net name only."""
        return list(self._named)

    def parameters(self):
        return [p for _, p in self._named]

    # -- forward ------------------------------------------------------------

    def forward(self, sample: WindowedSample, variant: VariantSpec = FULL) -> ForwardOutputs:
        c = self.config
        if sample.x_endo.shape != (c.n_endo, c.lookback):
            raise T.ShapeError(
                f"x_endo shape {sample.x_endo.shape} != ({c.n_endo}, {c.lookback})"
            )
        if sample.x_exo.shape != (c.n_exo, c.lookback):
            raise T.ShapeError(
                f"x_exo shape {sample.x_exo.shape} != ({c.n_exo}, {c.lookback})"
            )
        if variant.use_channel and sample.y_exo is None:
            raise ContractError("future exogenous input required for the channel path")

        if c.normalize:
            endo_stats = NormStats.from_lookback(sample.x_endo)
            exo_stats = NormStats.from_lookback(sample.x_exo)
            xn_endo = endo_stats.apply(sample.x_endo)
            xn_exo = exo_stats.apply(sample.x_exo)
            yn_exo = exo_stats.apply(sample.y_exo) if sample.y_exo is not None else None
        else:
            endo_stats = exo_stats = None
            xn_endo, xn_exo, yn_exo = sample.x_endo, sample.x_exo, sample.y_exo

        t_x_endo = Tensor(xn_endo)
        t_x_exo = Tensor(xn_exo)
        t_y_exo = Tensor(yn_exo) if yn_exo is not None else None

        lam1 = c.lambda1 if variant.lambda1_override is None else variant.lambda1_override
        if not variant.use_temporal:
            lam1 = 0.0
        if not variant.use_channel:
            lam1 = 1.0

        out = ForwardOutputs(
            y_endo_hat=None, y_endo_ddot=None, y_endo_dot=None, y_exo_hat=None,
            x_endo_hat=None, alphas_temporal=None, alpha_channel=None,
        )
        loss_terms = {}

        y_exo_hat_t = None
        if variant.use_temporal and variant.temporal_discovery:
            y_exo_hat_t, _ = self.temporal_discovery.forward(t_x_exo)
            out.y_exo_hat = (
                exo_stats.invert(y_exo_hat_t.data) if exo_stats else y_exo_hat_t.data.copy()
            )
            if sample.y_exo is not None:
                target = Tensor(exo_stats.apply(sample.y_exo) if exo_stats else sample.y_exo)
                loss_terms["l_t"] = T.l1_loss(y_exo_hat_t, target)

        ddot_t = None
        if variant.use_temporal:
            override = variant.alpha_override
            if variant.alpha_override is None and not variant.temporal_discovery:
                override = 1.0  # no discovery source: pure own-attention
            ddot_t, alphas = self.temporal_injection.forward(
                t_x_endo, t_x_exo, double_softmax=c.double_softmax,
                alpha_override=override,
            )
            out.alphas_temporal = np.array([float(a.data) for a in alphas])
            out.y_endo_ddot = (
                endo_stats.invert(ddot_t.data) if endo_stats else ddot_t.data.copy()
            )

        if variant.use_channel and variant.channel_discovery:
            x_endo_hat_t, _ = self.channel_discovery.forward(t_x_exo)
            out.x_endo_hat = (
                endo_stats.invert(x_endo_hat_t.data) if endo_stats else x_endo_hat_t.data.copy()
            )
            loss_terms["l_c"] = T.l1_loss(x_endo_hat_t, t_x_endo)

        dot_t = None
        if variant.use_channel:
            override = variant.alpha_override
            if variant.alpha_override is None and not variant.channel_discovery:
                override = 1.0
            dot_t, alpha_c = self.channel_injection.forward(
                t_y_exo, t_x_exo, double_softmax=c.double_softmax,
                alpha_override=override,
            )
            out.alpha_channel = float(alpha_c.data)
            out.y_endo_dot = (
                endo_stats.invert(dot_t.data) if endo_stats else dot_t.data.copy()
            )

        if ddot_t is not None and dot_t is not None:
            fused_t = T.add(T.scale(ddot_t, lam1), T.scale(dot_t, 1.0 - lam1))
        elif ddot_t is not None:
            fused_t = ddot_t
        else:
            fused_t = dot_t
        out.y_endo_hat = (
            endo_stats.invert(fused_t.data) if endo_stats else fused_t.data.copy()
        )

        if sample.y_endo is not None:
            y_target = Tensor(
                endo_stats.apply(sample.y_endo) if endo_stats else sample.y_endo
            )
            l_f = T.l1_loss(fused_t, y_target)
            loss_terms["l_f"] = l_f
            total = l_f
            aux = [t for k, t in loss_terms.items() if k in ("l_t", "l_c")]
            if aux and c.lambda2 != 0.0:
                s = aux[0] if len(aux) == 1 else T.add(aux[0], aux[1])
                total = T.add(l_f, T.scale(s, c.lambda2))
            out.total_loss = total
            out.losses = {k: float(v.data) for k, v in loss_terms.items()}
            out.losses["l_total"] = float(total.data)
        else:
            out.losses = {k: float(v.data) for k, v in loss_terms.items()}
        return out

    def predict(self, sample: WindowedSample, variant: VariantSpec = FULL) -> np.ndarray:
        with T.no_grad():
            return self.forward(sample, variant).y_endo_hat

    def predict_without_future_exo(self, sample: WindowedSample,
                                   variant: VariantSpec = FULL) -> np.ndarray:
        """Inference without observed future exogenous values: the temporal
        discovery forecast stands in for them, then the normal forward runs.
        """
        with T.no_grad():
            if self.config.normalize:
                exo_stats = NormStats.from_lookback(sample.x_exo)
                xn_exo = exo_stats.apply(sample.x_exo)
            else:
                exo_stats, xn_exo = None, sample.x_exo
            y_exo_hat_t, _ = self.temporal_discovery.forward(Tensor(xn_exo))
            y_exo_hat = (
                exo_stats.invert(y_exo_hat_t.data) if exo_stats else y_exo_hat_t.data
            )
            substituted = replace(sample, y_exo=y_exo_hat, y_endo=None)
            return self.forward(substituted, variant).y_endo_hat
