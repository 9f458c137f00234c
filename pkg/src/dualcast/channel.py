"""Channel causal pair: attention runs ACROSS channels over whole-series
tokens. Discovery reconstructs endogenous history from exogenous history;
injection predicts the endogenous future from the exogenous future,
reusing the discovery net's attention projections with one global gate.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import CausalTrmBlock, GateMLP, TrmBlock
from .embedding import SeriesEmbed, uniform_init
from .tensor import Parameter, Tensor


class MixHead:
    """Token-wise MLP, then channel mixing [N x D] and temporal projection
    [d x L]: output = Mix . mlp(tokens) . Proj."""

    def __init__(self, rng, d, n_out, d_in, length, prefix):
        self.mlp_w1 = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.mlp.w1")
        self.mlp_b1 = Parameter(np.zeros(d), f"{prefix}.mlp.b1")
        self.mlp_w2 = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.mlp.w2")
        self.mlp_b2 = Parameter(np.zeros(d), f"{prefix}.mlp.b2")
        self.mix = Parameter(uniform_init(rng, d_in, (n_out, d_in)), f"{prefix}.mix")
        self.proj = Parameter(uniform_init(rng, d, (d, length)), f"{prefix}.proj")

    def __call__(self, tokens: Tensor) -> Tensor:
        h = T.gelu(T.add(T.matmul(tokens, self.mlp_w1), self.mlp_b1))
        h = T.add(T.matmul(h, self.mlp_w2), self.mlp_b2)
        return T.matmul(T.matmul(self.mix, h), self.proj)

    def parameters(self):
        return [self.mlp_w1, self.mlp_b1, self.mlp_w2, self.mlp_b2, self.mix, self.proj]


class ChannelDiscoveryNet:
    """Series-token transformer mapping exogenous history [D x T] to a
    reconstruction of endogenous history [N x T]."""

    def __init__(self, rng, n_exo, n_endo, lookback, d, d_ff, n_heads, n_layers=1):
        prefix = "channel.discovery"
        self.embed = SeriesEmbed(rng, lookback, d, f"{prefix}.embed")
        self.blocks = [
            TrmBlock(rng, d, d_ff, n_heads, f"{prefix}.block{i}", primed=True)
            for i in range(n_layers)
        ]
        self.head = MixHead(rng, d, n_endo, n_exo, lookback, f"{prefix}.head")

    def forward(self, x_exo: Tensor):
        """x_exo [D x T] -> (x_endo_hat [N x T], last score [D x D])."""
        tokens = self.embed(x_exo)
        score = None
        for block in self.blocks:
            tokens, score = block(tokens)
        return self.head(tokens), score

    def parameters(self):
        out = self.embed.parameters()
        for b in self.blocks:
            out += b.parameters()
        return out + self.head.parameters()


class ChannelInjectionNet:
    """Series-token transformer over the exogenous future [D x F], with the
    discovery net's projections fused in under one global gate."""

    def __init__(self, rng, discovery: ChannelDiscoveryNet, n_exo, n_endo,
                 lookback, horizon, d, d_ff, n_heads, d_gate):
        prefix = "channel.injection"
        self.embed = SeriesEmbed(rng, horizon, d, f"{prefix}.embed")
        self.blocks = [
            CausalTrmBlock(
                rng, d, d_ff, n_heads,
                injected_q=disc_block.w_q,
                injected_k=disc_block.w_k,
                prefix=f"{prefix}.block{i}",
            )
            for i, disc_block in enumerate(discovery.blocks)
        ]
        self.gate = GateMLP(rng, n_exo * lookback, n_exo * horizon, d_gate,
                            f"{prefix}.gate")
        self.head = MixHead(rng, d, n_endo, n_exo, horizon, f"{prefix}.head")

    def forward(self, y_exo: Tensor, x_exo: Tensor, double_softmax=True,
                alpha_override=None):
        """Returns (y_endo_dot [N x F], alpha scalar Tensor).

        Reads only exogenous tensors; endogenous data never enters here.
        """
        if alpha_override is None:
            alpha = self.gate(x_exo, y_exo)
        else:
            alpha = Tensor(float(alpha_override))
        tokens = self.embed(y_exo)
        for block in self.blocks:
            tokens, _ = block(tokens, alpha, double_softmax=double_softmax)
        return self.head(tokens), alpha

    def parameters(self):
        out = self.embed.parameters()
        for b in self.blocks:
            out += b.parameters()
        return out + self.gate.parameters() + self.head.parameters()
