"""Flat key-value run configuration files.

One `dotted.key = value` per line, `#` comments, no nesting. Unknown keys
and malformed values fail with the offending field path.
"""

from __future__ import annotations

from .data import SyntheticSpec
from .model import ConfigError, DagConfig
from .training import TrainConfig

_MODEL_KEYS = {
    "lookback": int, "horizon": int, "d_model": int, "patch_len": int,
    "stride": int, "n_layers": int, "n_heads": int, "d_ff": int,
    "d_gate": int, "lambda1": float, "lambda2": float,
    "double_softmax": bool, "normalize": bool, "seed": int,
}
_TRAIN_KEYS = {
    "epochs": int, "batch_size": int, "lr": float, "patience": int,
    "seed": int, "max_train_windows_per_epoch": int, "max_val_windows": int,
}
_SYNTH_KEYS = {
    "n_exo": int, "n_endo": int, "length": int, "ar1": float, "ar2": float,
    "season_period": int, "season_amplitude": float, "rho": float,
    "noise_exo": float, "noise_endo": float, "seed": int,
}
_DATA_KEYS = {"path": str, "endo_count": int, "endo_names": str, "split": str}
_OUT_KEYS = {"dir": str}


def parse_config_file(path) -> dict:
    entries = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ConfigError(f"{path}:{line_no}: empty key or value")
            if key in entries:
                raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
            entries[key] = value
    return entries


def _convert(key, value, typ):
    if typ is bool:
        low = value.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected boolean, got {value!r}")
    try:
        return typ(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {value!r}") from None


def _section(entries, prefix, schema):
    out = {}
    for key, value in entries.items():
        if not key.startswith(prefix + "."):
            continue
        name = key[len(prefix) + 1 :]
        if name not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = _convert(key, value, schema[name])
    return out


def validate_keys(entries):
    sections = {"model": _MODEL_KEYS, "train": _TRAIN_KEYS, "synth": _SYNTH_KEYS,
                "data": _DATA_KEYS, "out": _OUT_KEYS}
    for key in entries:
        prefix, _, name = key.partition(".")
        if prefix not in sections or name not in sections[prefix]:
            raise ConfigError(f"unknown config key {key!r}")


def parse_split(value: str):
    try:
        ratios = tuple(int(p) for p in value.split(":"))
    except ValueError:
        raise ConfigError(f"data.split: expected a:b:c, got {value!r}") from None
    if len(ratios) != 3:
        raise ConfigError(f"data.split: expected three parts, got {value!r}")
    return ratios


def build_synthetic_spec(entries) -> SyntheticSpec:
    s = _section(entries, "synth", _SYNTH_KEYS)
    ar = (s.pop("ar1", 0.6), s.pop("ar2", 0.2))
    return SyntheticSpec(ar=ar, **s)


def build_dag_config(entries, n_endo, n_exo) -> DagConfig:
    m = _section(entries, "model", _MODEL_KEYS)
    if "lookback" not in m or "horizon" not in m:
        raise ConfigError("model.lookback and model.horizon are required")
    return DagConfig(n_endo=n_endo, n_exo=n_exo, **m)


def build_train_config(entries) -> TrainConfig:
    return TrainConfig(**_section(entries, "train", _TRAIN_KEYS))
