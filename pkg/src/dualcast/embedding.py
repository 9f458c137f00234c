"""Patch-wise and series-wise token embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Parameter, ShapeError, Tensor


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class PatchGeometry:
    """Sliding-patch layout over a lookback window.

    Trailing steps that do not fill a whole patch are dropped.
    """

    lookback: int
    patch_len: int
    stride: int

    def __post_init__(self):
        if self.patch_len <= 0 or self.stride <= 0 or self.lookback <= 0:
            raise GeometryError("patch geometry extents must be positive")
        if self.patch_len > self.lookback:
            raise GeometryError(
                f"patch_len {self.patch_len} exceeds lookback {self.lookback}"
            )

    @property
    def patch_count(self) -> int:
        return (self.lookback - self.patch_len) // self.stride + 1


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def patchify(series: Tensor, geom: PatchGeometry) -> Tensor:
    """Split a length-T series into an [M x P] patch matrix."""
    if series.data.ndim != 1:
        raise ShapeError(f"patchify: expected 1-D series, got shape {series.shape}")
    if series.size < geom.patch_len:
        raise GeometryError(
            f"patchify: series length {series.size} shorter than patch_len {geom.patch_len}"
        )
    rows = [
        T.reshape(
            _slice_vec(series, j * geom.stride, j * geom.stride + geom.patch_len),
            (1, geom.patch_len),
        )
        for j in range(geom.patch_count)
    ]
    return T.concat(rows, axis=0) if len(rows) > 1 else rows[0]


def _slice_vec(a: Tensor, start: int, stop: int) -> Tensor:
    m = T.reshape(a, (1, a.size))
    return T.reshape(T.slice_cols(m, start, stop), (stop - start,))


class PatchEmbed:
    """Linear patch projection plus a learned positional table.

    One instance is shared across all channels of a network.
    """

    def __init__(self, rng, geom: PatchGeometry, d_model: int, prefix: str):
        self.geom = geom
        self.projection = Parameter(
            uniform_init(rng, geom.patch_len, (geom.patch_len, d_model)),
            f"{prefix}.projection",
        )
        self.positional = Parameter(
            uniform_init(rng, geom.patch_len, (geom.patch_count, d_model)),
            f"{prefix}.positional",
        )

    def __call__(self, patches: Tensor) -> Tensor:
        if patches.shape[0] != self.positional.shape[0]:
            raise ShapeError(
                f"patch_embed: {patches.shape[0]} patches vs positional table "
                f"{self.positional.shape[0]}"
            )
        return T.add(T.matmul(patches, self.projection), self.positional)

    def parameters(self):
        return [self.projection, self.positional]


class SeriesEmbed:
    """Maps each channel's whole series to one d-dimensional token."""

    def __init__(self, rng, length: int, d_model: int, prefix: str):
        self.length = length
        self.projection = Parameter(
            uniform_init(rng, length, (length, d_model)), f"{prefix}.projection"
        )

    def __call__(self, series: Tensor) -> Tensor:
        if series.data.ndim != 2 or series.shape[1] != self.length:
            raise ShapeError(
                f"series_embed: expected [C x {self.length}], got {series.shape}"
            )
        return T.matmul(series, self.projection)

    def parameters(self):
        return [self.projection]
