"""Binary checkpoint format: magic + JSON header + raw float64 parameter
records + sha256 integrity checksum. Round-trips are bitwise lossless."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np

from .model import DagConfig, DagModel

MAGIC = b"DCFC\x01\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, model: DagModel, run_config: dict | None = None) -> None:
    params = model.named_parameters()
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": asdict(model.config),
        "run_config": run_config or {},
        "params": [{"name": n, "shape": list(p.shape)} for n, p in params],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    body = b"".join(
        np.ascontiguousarray(p.data, dtype="<f8").tobytes() for _, p in params
    )
    payload = MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + body
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(payload + digest)


def load(path) -> tuple[DagModel, dict]:
    """Rebuild the model from a checkpoint; returns (model, run_config)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8 + 32 or not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch")
    off = len(MAGIC)
    (header_len,) = struct.unpack_from("<Q", payload, off)
    off += 8
    header = json.loads(payload[off : off + header_len].decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('format_version')}")
    off += header_len

    model = DagModel(DagConfig(**header["model_config"]))
    named = dict(model.named_parameters())
    if set(named) != {rec["name"] for rec in header["params"]}:
        raise CheckpointError(f"{path}: parameter set does not match model config")
    for rec in header["params"]:
        p = named[rec["name"]]
        shape = tuple(rec["shape"])
        if p.shape != shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {rec['name']}: {shape} vs {p.shape}"
            )
        n_bytes = int(np.prod(shape)) * 8
        p.data = np.frombuffer(payload[off : off + n_bytes], dtype="<f8").reshape(shape).copy()
        off += n_bytes
    if off != len(payload):
        raise CheckpointError(f"{path}: trailing bytes in parameter section")
    return model, header["run_config"]
