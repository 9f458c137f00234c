"""Dataset ingestion, chronological splitting, sliding windows, per-window
normalization, and a seeded synthetic generator with planted causality.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor import ContractError


class ParseError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class RawDataset:
    """Channels-by-time observation matrix; the LAST `endo_count` channels
    are the endogenous (target) series."""

    values: np.ndarray  # [C x L]
    channel_names: list
    endo_count: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        c, length = self.values.shape
        if not 1 <= self.endo_count < c:
            raise ContractError(
                f"endo_count {self.endo_count} must satisfy 1 <= N < C={c}"
            )
        if length == 0:
            raise DataError("dataset has no time steps")
        if not np.all(np.isfinite(self.values)):
            raise DataError("dataset contains non-finite values")

    @property
    def n_channels(self):
        return self.values.shape[0]

    @property
    def length(self):
        return self.values.shape[1]

    @property
    def exo_count(self):
        return self.n_channels - self.endo_count

    def exo(self):
        return self.values[: self.exo_count]

    def endo(self):
        return self.values[self.exo_count :]


@dataclass(frozen=True)
class WindowedSample:
    x_endo: np.ndarray  # [N x T]
    x_exo: np.ndarray  # [D x T]
    y_endo: np.ndarray  # [N x F]
    y_exo: np.ndarray  # [D x F]
    origin: int


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_csv(path, endo_count=None, endo_names=None) -> RawDataset:
    """Load a comma-separated dataset: one row per time step, one column
    per channel, optional header row and optional leading timestamp column.

    Endogenous channels are either the last `endo_count` columns or the
    columns named in `endo_names` (which are moved to the end).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")

    has_header = not all(_is_number(c) or not c.strip() for c in rows[0])
    header = [c.strip() for c in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    if not body:
        raise ParseError(f"{path}: no data rows")

    drop_first = not _is_number(body[0][0])
    width = len(body[0])
    matrix = np.empty((len(body), width - (1 if drop_first else 0)))
    for r, row in enumerate(body):
        line_no = r + (2 if has_header else 1)
        if len(row) != width:
            raise ParseError(f"{path}: ragged row at line {line_no}")
        cells = row[1:] if drop_first else row
        for c, cell in enumerate(cells):
            try:
                matrix[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at line {line_no}"
                ) from None

    n_cols = matrix.shape[1]
    if header:
        names = header[1:] if drop_first else header
    else:
        names = [f"ch{i}" for i in range(n_cols)]

    order = list(range(n_cols))
    if endo_names is not None:
        missing = [n for n in endo_names if n not in names]
        if missing:
            raise ParseError(f"{path}: unknown endogenous channel names {missing}")
        endo_idx = [names.index(n) for n in endo_names]
        order = [i for i in order if i not in endo_idx] + endo_idx
        endo_count = len(endo_idx)
    if endo_count is None:
        raise ContractError("load_csv: endo_count or endo_names required")
    values = matrix[:, order].T
    return RawDataset(values, [names[i] for i in order], endo_count)


def split(dataset: RawDataset, ratios) -> tuple:
    """Chronological (train, val, test) index ranges from integer ratios,
    with boundaries at floor(L * cumulative fraction)."""
    ratios = tuple(ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ContractError(f"split: need three positive ratios, got {ratios}")
    total = sum(ratios)
    length = dataset.length
    b1 = int(length * ratios[0] / total)
    b2 = int(length * (ratios[0] + ratios[1]) / total)
    parts = ((0, b1), (b1, b2), (b2, length))
    if any(hi <= lo for lo, hi in parts):
        raise ContractError(f"split: degenerate empty split for L={length}, ratios={ratios}")
    return parts


def window(dataset: RawDataset, index_range, lookback, horizon):
    """All (lookback, horizon) samples whose full extent fits in the range.

    Yields len - T - F + 1 samples; a too-short range produces an empty
    list with a warning, not an error.
    """
    lo, hi = index_range
    n_exo = dataset.exo_count
    count = (hi - lo) - lookback - horizon + 1
    if count <= 0:
        warnings.warn(
            f"range [{lo}, {hi}) too short for lookback {lookback} + horizon {horizon}",
            stacklevel=2,
        )
        return []
    samples = []
    vals = dataset.values
    for o in range(lo, lo + count):
        past = vals[:, o : o + lookback]
        fut = vals[:, o + lookback : o + lookback + horizon]
        samples.append(
            WindowedSample(
                x_endo=past[n_exo:].copy(),
                x_exo=past[:n_exo].copy(),
                y_endo=fut[n_exo:].copy(),
                y_exo=fut[:n_exo].copy(),
                origin=o,
            )
        )
    return samples


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass
class SyntheticSpec:
    """AR(2)-plus-seasonality exogenous channels driving an AR(1) endogenous
    response through a known mixing matrix; the closed-form best one-step
    predictor is rho * endo[t-1] + (B @ exo[t])."""

    n_exo: int = 4
    n_endo: int = 1
    length: int = 5000
    ar: tuple = (0.6, 0.2)
    season_period: int = 24
    season_amplitude: float = 1.0
    mix: np.ndarray | None = None  # B [N x D]
    rho: float = 0.7
    noise_exo: float = 0.5
    noise_endo: float = 0.2
    seed: int = 0

    def __post_init__(self):
        phi1, phi2 = self.ar
        # AR(2) stationarity triangle
        if not (abs(phi2) < 1 and phi1 + phi2 < 1 and phi2 - phi1 < 1):
            raise DataError(f"non-stationary AR coefficients {self.ar}")
        if self.noise_exo < 0 or self.noise_endo < 0:
            raise DataError("noise levels must be nonnegative")
        if abs(self.rho) >= 1:
            raise DataError(f"endogenous AR coefficient {self.rho} not stationary")
        if self.mix is None:
            rng = np.random.default_rng(self.seed + 7919)
            self.mix = rng.uniform(-1.0, 1.0, size=(self.n_endo, self.n_exo))
        else:
            self.mix = np.asarray(self.mix, dtype=np.float64)
            if self.mix.shape != (self.n_endo, self.n_exo):
                raise DataError(
                    f"mix shape {self.mix.shape} != ({self.n_endo}, {self.n_exo})"
                )


def gen_synthetic(spec: SyntheticSpec) -> RawDataset:
    rng = np.random.default_rng(spec.seed)
    d, n, length = spec.n_exo, spec.n_endo, spec.length
    phi1, phi2 = spec.ar
    burn = 200
    total = length + burn

    t = np.arange(total)
    phases = rng.uniform(0, 2 * np.pi, size=d)
    season = spec.season_amplitude * np.sin(
        2 * np.pi * t[None, :] / spec.season_period + phases[:, None]
    )
    eps = rng.normal(0.0, 1.0, size=(d, total)) * spec.noise_exo
    exo = np.zeros((d, total))
    for s in range(2, total):
        exo[:, s] = phi1 * exo[:, s - 1] + phi2 * exo[:, s - 2] + eps[:, s]
    exo += season

    eta = rng.normal(0.0, 1.0, size=(n, total)) * spec.noise_endo
    endo = np.zeros((n, total))
    for s in range(1, total):
        endo[:, s] = spec.rho * endo[:, s - 1] + spec.mix @ exo[:, s] + eta[:, s]

    values = np.vstack([exo[:, burn:], endo[:, burn:]])
    names = [f"exo{i}" for i in range(d)] + [f"endo{i}" for i in range(n)]
    return RawDataset(values, names, n, metadata={"synthetic": True, "seed": spec.seed})


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray  # [C]
    std: np.ndarray  # [C], clamped to 1 for near-constant channels

    @classmethod
    def from_lookback(cls, x: np.ndarray) -> "NormStats":
        mu = x.mean(axis=1)
        var = x.var(axis=1)
        std = np.where(var < 1e-12, 1.0, np.sqrt(var))
        return cls(mean=mu, std=std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean[:, None]) / self.std[:, None]

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.std[:, None] + self.mean[:, None]
