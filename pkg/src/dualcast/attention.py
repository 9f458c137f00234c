"""Transformer blocks: the plain encoder block, the variant with injected
attention projections and gated score fusion, and the gating MLPs.

Blocks are pre-norm with residual connections around attention and the
feedforward. Attention has no output projection; the feedforward is
d -> d_ff -> d with GELU. Head count is configurable but defaults to 1,
matching the single-head score equations.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .embedding import uniform_init
from .tensor import ContractError, Parameter, Tensor


class LayerNormParams:
    def __init__(self, d: int, prefix: str):
        self.gain = Parameter(np.ones(d), f"{prefix}.gain")
        self.bias = Parameter(np.zeros(d), f"{prefix}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)

    def parameters(self):
        return [self.gain, self.bias]


class FeedForward:
    def __init__(self, rng, d: int, d_ff: int, prefix: str):
        self.w1 = Parameter(uniform_init(rng, d, (d, d_ff)), f"{prefix}.w1")
        self.b1 = Parameter(np.zeros(d_ff), f"{prefix}.b1")
        self.w2 = Parameter(uniform_init(rng, d_ff, (d_ff, d)), f"{prefix}.w2")
        self.b2 = Parameter(np.zeros(d), f"{prefix}.b2")

    def __call__(self, x: Tensor) -> Tensor:
        h = T.gelu(T.add(T.matmul(x, self.w1), self.b1))
        return T.add(T.matmul(h, self.w2), self.b2)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]


def _head_scores(x: Tensor, w_q: Parameter, w_k: Parameter, n_heads: int):
    """Per-head softmaxed attention scores from full [d x d] projections."""
    d = x.shape[1]
    d_head = d // n_heads
    q = T.matmul(x, w_q)
    k = T.matmul(x, w_k)
    scores = []
    for h in range(n_heads):
        qh = T.slice_cols(q, h * d_head, (h + 1) * d_head)
        kh = T.slice_cols(k, h * d_head, (h + 1) * d_head)
        raw = T.scale(T.matmul(qh, T.transpose(kh)), 1.0 / math.sqrt(d_head))
        scores.append(T.softmax_rows(raw))
    return scores


def _attend(scores, v: Tensor, n_heads: int) -> Tensor:
    d = v.shape[1]
    d_head = d // n_heads
    ctx = [
        T.matmul(s, T.slice_cols(v, h * d_head, (h + 1) * d_head))
        for h, s in enumerate(scores)
    ]
    return ctx[0] if n_heads == 1 else T.concat(ctx, axis=1)


def _inspection_score(scores) -> Tensor:
    if len(scores) == 1:
        return scores[0]
    # detached mean over heads, for inspection only
    return Tensor(np.mean([s.data for s in scores], axis=0))


class TrmBlock:
    """Standard pre-norm encoder block; returns (output, attention score)."""

    def __init__(self, rng, d: int, d_ff: int, n_heads: int, prefix: str, primed=False):
        if d % n_heads != 0:
            raise ContractError(f"d_model {d} not divisible by n_heads {n_heads}")
        suffix = "_prime" if primed else ""
        self.d = d
        self.n_heads = n_heads
        self.w_q = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_q{suffix}")
        self.w_k = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_k{suffix}")
        self.w_v = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_v{suffix}")
        self.ln1 = LayerNormParams(d, f"{prefix}.ln1")
        self.ln2 = LayerNormParams(d, f"{prefix}.ln2")
        self.ff = FeedForward(rng, d, d_ff, f"{prefix}.ff")

    def __call__(self, tokens: Tensor, resoftmax: bool = False):
        if tokens.shape[1] != self.d:
            raise T.ShapeError(
                f"trm_block: token width {tokens.shape[1]} != d_model {self.d}"
            )
        x = self.ln1(tokens)
        scores = _head_scores(x, self.w_q, self.w_k, self.n_heads)
        applied = [T.softmax_rows(s) for s in scores] if resoftmax else scores
        v = T.matmul(x, self.w_v)
        h = T.add(tokens, _attend(applied, v, self.n_heads))
        out = T.add(h, self.ff(self.ln2(h)))
        return out, _inspection_score(scores)

    def parameters(self):
        return (
            [self.w_q, self.w_k, self.w_v]
            + self.ln1.parameters()
            + self.ln2.parameters()
            + self.ff.parameters()
        )


class CausalTrmBlock:
    """Encoder block whose attention mixes its own scores with scores from
    injected (aliased, co-trained) query/key projections.

    injected_q / injected_k are the live Parameter objects of the paired
    discovery block, never copies.
    """

    def __init__(
        self,
        rng,
        d: int,
        d_ff: int,
        n_heads: int,
        injected_q: Parameter,
        injected_k: Parameter,
        prefix: str,
    ):
        if d % n_heads != 0:
            raise ContractError(f"d_model {d} not divisible by n_heads {n_heads}")
        if injected_q.shape != (d, d) or injected_k.shape != (d, d):
            raise T.ShapeError("injected projections must be [d x d]")
        self.d = d
        self.n_heads = n_heads
        self.injected_q = injected_q
        self.injected_k = injected_k
        self.w_q = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_q")
        self.w_k = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_k")
        self.w_v = Parameter(uniform_init(rng, d, (d, d)), f"{prefix}.w_v")
        self.ln1 = LayerNormParams(d, f"{prefix}.ln1")
        self.ln2 = LayerNormParams(d, f"{prefix}.ln2")
        self.ff = FeedForward(rng, d, d_ff, f"{prefix}.ff")

    def __call__(self, tokens: Tensor, alpha: Tensor, double_softmax: bool = True):
        """alpha is a scalar tensor in [0, 1]; gradients flow through it."""
        if tokens.shape[1] != self.d:
            raise T.ShapeError(
                f"causal_trm_block: token width {tokens.shape[1]} != d_model {self.d}"
            )
        a = float(alpha.data)
        if not (0.0 <= a <= 1.0) or not np.isfinite(a):
            raise ContractError(f"causal_trm_block: alpha {a} outside [0, 1]")
        x = self.ln1(tokens)
        # a fixed endpoint gate needs only one score path; the skipped branch
        # would contribute exactly zero (softmax outputs are positive)
        fixed = not (alpha.requires_grad or alpha._parents)
        if fixed and a == 1.0:
            fused = _head_scores(x, self.w_q, self.w_k, self.n_heads)
        elif fixed and a == 0.0:
            fused = _head_scores(x, self.injected_q, self.injected_k, self.n_heads)
        else:
            own = _head_scores(x, self.w_q, self.w_k, self.n_heads)
            inj = _head_scores(x, self.injected_q, self.injected_k, self.n_heads)
            one_minus = T.sub(Tensor(1.0), alpha)
            fused = [
                T.add(T.mul(alpha, so), T.mul(one_minus, si)) for so, si in zip(own, inj)
            ]
        applied = [T.softmax_rows(f) for f in fused] if double_softmax else fused
        v = T.matmul(x, self.w_v)
        h = T.add(tokens, _attend(applied, v, self.n_heads))
        out = T.add(h, self.ff(self.ln2(h)))
        return out, _inspection_score(fused)

    def parameters(self):
        """Own parameters only; the injected pair belongs to the discovery block."""
        return (
            [self.w_q, self.w_k, self.w_v]
            + self.ln1.parameters()
            + self.ln2.parameters()
            + self.ff.parameters()
        )


class GateMLP:
    """Scalar gate: sigmoid of the dot product of two MLP encodings.

    The sigmoid squashes the raw dot product into (0, 1) so the fused
    attention scores stay row-stochastic.
    """

    def __init__(self, rng, in_a: int, in_b: int, hidden: int, prefix: str):
        self.hidden = hidden
        self.a_w1 = Parameter(uniform_init(rng, in_a, (in_a, hidden)), f"{prefix}.a.w1")
        self.a_b1 = Parameter(np.zeros(hidden), f"{prefix}.a.b1")
        self.a_w2 = Parameter(uniform_init(rng, hidden, (hidden, hidden)), f"{prefix}.a.w2")
        self.a_b2 = Parameter(np.zeros(hidden), f"{prefix}.a.b2")
        self.b_w1 = Parameter(uniform_init(rng, in_b, (in_b, hidden)), f"{prefix}.b.w1")
        self.b_b1 = Parameter(np.zeros(hidden), f"{prefix}.b.b1")
        self.b_w2 = Parameter(uniform_init(rng, hidden, (hidden, hidden)), f"{prefix}.b.w2")
        self.b_b2 = Parameter(np.zeros(hidden), f"{prefix}.b.b2")

    def _encode(self, x: Tensor, w1, b1, w2, b2) -> Tensor:
        row = T.flatten_row(x)
        if row.shape[1] != w1.shape[0]:
            raise T.ShapeError(
                f"gate: conditioning width {row.shape[1]} != expected {w1.shape[0]}"
            )
        h = T.relu(T.add(T.matmul(row, w1), b1))
        return T.flatten_vec(T.add(T.matmul(h, w2), b2))

    def __call__(self, cond_a: Tensor, cond_b: Tensor) -> Tensor:
        ea = self._encode(cond_a, self.a_w1, self.a_b1, self.a_w2, self.a_b2)
        eb = self._encode(cond_b, self.b_w1, self.b_b1, self.b_w2, self.b_b2)
        return T.sigmoid(T.dot(ea, eb))

    def parameters(self):
        return [
            self.a_w1, self.a_b1, self.a_w2, self.a_b2,
            self.b_w1, self.b_b1, self.b_w2, self.b_b2,
        ]
