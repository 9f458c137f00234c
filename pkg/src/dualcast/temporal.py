"""Temporal causal pair: a discovery network forecasting future exogenous
series from their history, and an injection network forecasting future
endogenous series from endogenous history while reusing the discovery
network's attention projections.

Channels are processed independently with shared weights.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import CausalTrmBlock, GateMLP, TrmBlock
from .embedding import PatchEmbed, PatchGeometry, patchify, uniform_init
from .tensor import Parameter, Tensor


class FlattenHead:
    """Linear map from flattened tokens [M*d] to a horizon vector [F]."""

    def __init__(self, rng, m: int, d: int, horizon: int, prefix: str):
        self.w = Parameter(uniform_init(rng, m * d, (m * d, horizon)), f"{prefix}.w")
        self.b = Parameter(np.zeros(horizon), f"{prefix}.b")

    def __call__(self, tokens: Tensor) -> Tensor:
        return T.add(T.matmul(T.flatten_row(tokens), self.w), self.b)

    def parameters(self):
        return [self.w, self.b]


class TemporalDiscoveryNet:
    """Per-channel patch transformer mapping exogenous history to its future.

    Its attention query/key projections are the exported causality
    representation consumed by TemporalInjectionNet.
    """

    def __init__(self, rng, geom: PatchGeometry, d, d_ff, n_heads, horizon, n_layers=1):
        self.geom = geom
        prefix = "temporal.discovery"
        self.embed = PatchEmbed(rng, geom, d, f"{prefix}.embed")
        self.blocks = [
            TrmBlock(rng, d, d_ff, n_heads, f"{prefix}.block{i}", primed=True)
            for i in range(n_layers)
        ]
        self.head = FlattenHead(rng, geom.patch_count, d, horizon, f"{prefix}.head")

    def channel_tokens(self, series: Tensor) -> Tensor:
        tokens = self.embed(patchify(series, self.geom))
        for block in self.blocks:
            tokens, _ = block(tokens)
        return tokens

    def forward(self, x_exo: Tensor):
        """x_exo [D x T] -> (y_exo_hat [D x F], per-channel tokens)."""
        rows, tokens = [], []
        for i in range(x_exo.shape[0]):
            tok = self.channel_tokens(_row(x_exo, i))
            tokens.append(tok)
            rows.append(self.head(tok))
        return _stack_rows(rows), tokens

    def parameters(self):
        out = self.embed.parameters()
        for b in self.blocks:
            out += b.parameters()
        return out + self.head.parameters()


class TemporalInjectionNet:
    """Per-channel patch transformer over endogenous history with the
    discovery net's projections fused in via the gated score mix."""

    def __init__(self, rng, discovery: TemporalDiscoveryNet, geom, d, d_ff,
                 n_heads, d_gate, lookback, horizon):
        self.geom = geom
        prefix = "temporal.injection"
        self.embed = PatchEmbed(rng, geom, d, f"{prefix}.embed")
        self.blocks = [
            CausalTrmBlock(
                rng, d, d_ff, n_heads,
                injected_q=disc_block.w_q,
                injected_k=disc_block.w_k,
                prefix=f"{prefix}.block{i}",
            )
            for i, disc_block in enumerate(discovery.blocks)
        ]
        self.gate = GateMLP(rng, lookback, lookback, d_gate, f"{prefix}.gate")
        self.head = FlattenHead(rng, geom.patch_count, d, horizon, f"{prefix}.head")

    def forward(self, x_endo: Tensor, x_exo: Tensor, double_softmax=True,
                alpha_override=None):
        """Returns (y_endo_ddot [N x F], alphas list of scalar Tensors).

        The exogenous conditioning for every gate is the mean over the D
        exogenous channels; the endogenous side is channel i itself.
        """
        n = x_endo.shape[0]
        d_exo = x_exo.shape[0]
        mean_exo = T.matmul(Tensor(np.full((1, d_exo), 1.0 / d_exo)), x_exo)
        rows, alphas = [], []
        for i in range(n):
            series = _row(x_endo, i)
            if alpha_override is None:
                alpha = self.gate(mean_exo, series)
            else:
                alpha = Tensor(float(alpha_override))
            alphas.append(alpha)
            tokens = self.embed(patchify(series, self.geom))
            for block in self.blocks:
                tokens, _ = block(tokens, alpha, double_softmax=double_softmax)
            rows.append(self.head(tokens))
        return _stack_rows(rows), alphas

    def parameters(self):
        out = self.embed.parameters()
        for b in self.blocks:
            out += b.parameters()
        return out + self.gate.parameters() + self.head.parameters()


def _row(mat: Tensor, i: int) -> Tensor:
    width = mat.shape[1]
    flat = T.reshape(mat, (1, mat.size))
    return T.reshape(T.slice_cols(flat, i * width, (i + 1) * width), (width,))


def _stack_rows(rows) -> Tensor:
    return T.concat(rows, axis=0) if len(rows) > 1 else rows[0]
