"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"MCSEP1"
    u32 entry count
    per entry: u16 name length, UTF-8 name, u8 dtype code, u8 ndim, u32 x ndim shape
    tensor payloads, float32 little-endian, in manifest order
    u32 config length, UTF-8 JSON model config (plus optional metadata)

Dtype code 1 is IEEE-754 float32, the only payload type written.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import InvalidArgument
from .model import ModelConfig, ParameterSet

MAGIC = b"MCSEP1"
FLOAT32 = 1


def save_checkpoint(path, params: ParameterSet, metadata: dict | None = None) -> None:
    header = [MAGIC, struct.pack("<I", len(params))]
    payload = []
    for name, tensor in params.items():
        raw = name.encode("utf-8")
        shape = tensor.shape
        header.append(struct.pack("<H", len(raw)) + raw + struct.pack("<BB", FLOAT32, len(shape)))
        header.append(struct.pack(f"<{len(shape)}I", *shape))
        payload.append(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())
    doc = {"model": params.config.to_dict()}
    if metadata:
        doc["metadata"] = metadata
    text = json.dumps(doc, sort_keys=True).encode("utf-8")
    Path(path).write_bytes(b"".join(header + payload + [struct.pack("<I", len(text)), text]))


def load_checkpoint(path, dtype=None) -> Tuple[ParameterSet, dict]:
    """Return ``(params, metadata)``."""
    buf = Path(path).read_bytes()
    if not buf.startswith(MAGIC):
        raise InvalidArgument(f"{path}: not a checkpoint (bad magic)")
    pos = len(MAGIC)

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, buf, pos)
        pos += struct.calcsize(fmt)
        return vals

    try:
        (count,) = take("<I")
        manifest = []
        for _ in range(count):
            (nlen,) = take("<H")
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            code, ndim = take("<BB")
            if code != FLOAT32:
                raise InvalidArgument(f"{path}: unsupported dtype code {code} for {name}")
            manifest.append((name, take(f"<{ndim}I")))
        arrays = {}
        for name, shape in manifest:
            n = int(np.prod(shape))
            arrays[name] = np.frombuffer(buf, dtype="<f4", count=n, offset=pos).reshape(shape)
            pos += 4 * n
        (tlen,) = take("<I")
        doc = json.loads(buf[pos : pos + tlen].decode("utf-8"))
    except struct.error as exc:
        raise InvalidArgument(f"{path}: truncated checkpoint") from exc
    config = ModelConfig.from_dict(doc["model"])
    return ParameterSet.from_arrays(config, arrays, dtype=dtype), doc.get("metadata", {})
