"""Policy checkpoint file: a JSON manifest (config, tensor names, shapes,
byte offsets) followed by the raw little-endian float64 data blob."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .policy import Policy, PolicyConfig

MAGIC = b"EVCKPT1\n"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _manifest_entries(arrays: dict[str, np.ndarray], offset: int):
    entries = []
    for name in sorted(arrays):
        a = arrays[name]
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size * 8
    return entries, offset


def save_policy(policy: Policy, path) -> None:
    params = {k: v.data for k, v in policy.named_params().items()}
    buffers = policy.buffers()
    tensor_entries, offset = _manifest_entries(params, 0)
    buffer_entries, offset = _manifest_entries(buffers, offset)
    header = json.dumps({
        "version": VERSION,
        "config": policy.config.to_dict(),
        "tensors": tensor_entries,
        "buffers": buffer_entries,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for entries, arrays in ((tensor_entries, params), (buffer_entries, buffers)):
            for e in entries:
                fh.write(np.ascontiguousarray(arrays[e["name"]], dtype="<f8").tobytes())


def load_policy(path) -> Policy:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a policy checkpoint")
    n = struct.unpack("<Q", raw[8:16])[0]
    header = json.loads(raw[16:16 + n].decode())
    if header["version"] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header['version']}")
    data = raw[16 + n:]

    policy = Policy(PolicyConfig.from_dict(header["config"]))
    params = policy.named_params()
    buffers = policy.buffers()
    for kind, target in (("tensors", params), ("buffers", buffers)):
        for e in header[kind]:
            name, shape, off = e["name"], tuple(e["shape"]), e["offset"]
            if name not in target:
                raise CheckpointError(f"unknown entry {name!r} in checkpoint")
            size = int(np.prod(shape, dtype=np.int64)) if shape else 1
            arr = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape)
            dest = target[name].data if kind == "tensors" else target[name]
            if dest.shape != arr.shape:
                raise CheckpointError(f"shape mismatch for {name!r}: "
                                      f"{dest.shape} vs {arr.shape}")
            dest[...] = arr
    return policy
