"""Binary model checkpoints.

Layout: magic ``MPSC``, format version (u16 LE), header length (u32 LE),
a UTF-8 JSON header (model config, scaler, caller extras, and the tensor
directory), the little-endian float32 tensor payloads, and a trailing
SHA-256 over everything before it.  Weights are stored at float32
precision; loading returns exactly the stored values, so save/load of a
loaded checkpoint is bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ..synfeat import ScalerParams
from .network import ModelConfig, NetworkParams

MAGIC = b"MPSC"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_DIGEST_SIZE = hashlib.sha256().digest_size


class CorruptChecksum(ValueError):
    """The file is truncated, altered, or not a checkpoint at all."""


class FormatVersionMismatch(ValueError):
    """The checkpoint was written by an unknown format version."""

    def __init__(self, found: int):
        super().__init__(f"checkpoint format version {found}, expected {FORMAT_VERSION}")
        self.found = found


def save_checkpoint(params: NetworkParams, path: str | Path,
                    extra: Optional[dict] = None) -> None:
    """Write ``params`` (weights quantized to float32) atomically to ``path``."""
    params.validate()
    directory = []
    payload = bytearray()
    for name, tensor in params.tensors.items():
        data = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
        directory.append({
            "name": name,
            "shape": list(tensor.shape),
            "offset": len(payload),
        })
        payload.extend(data)
    header = {
        "config": params.config.to_dict(),
        "scaler": params.scaler.to_dict() if params.scaler is not None else None,
        "extra": extra or {},
        "tensors": directory,
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    blob = body + hashlib.sha256(body).digest()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_checkpoint_with_extra(path: str | Path) -> tuple[NetworkParams, dict]:
    """Load a checkpoint and the caller-supplied extra header section."""
    blob = Path(path).read_bytes()
    if len(blob) < _PREFIX.size + _DIGEST_SIZE:
        raise CorruptChecksum("file too short to be a checkpoint")
    body, digest = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptChecksum("checksum mismatch")
    magic, version, header_len = _PREFIX.unpack_from(body)
    if magic != MAGIC:
        raise CorruptChecksum(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(version)
    header_end = _PREFIX.size + header_len
    if header_end > len(body):
        raise CorruptChecksum("header extends past end of file")
    header = json.loads(body[_PREFIX.size:header_end].decode("utf-8"))
    payload = body[header_end:]

    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise CorruptChecksum(f"tensor {entry['name']} extends past payload")
        tensors[entry["name"]] = np.frombuffer(
            payload, dtype="<f4", count=count, offset=start
        ).reshape(shape).astype(np.float32)

    scaler = header["scaler"]
    params = NetworkParams(
        config=ModelConfig.from_dict(header["config"]),
        tensors=tensors,
        scaler=ScalerParams.from_dict(scaler) if scaler is not None else None,
    )
    params.validate()
    return params, header.get("extra", {})


def load_checkpoint(path: str | Path) -> NetworkParams:
    """Load just the model parameters from a checkpoint file."""
    params, _ = load_checkpoint_with_extra(path)
    return params
