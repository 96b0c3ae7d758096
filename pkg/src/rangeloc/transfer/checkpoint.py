"""Checkpoint format: magic "I3DCK1", u32 version, then a named table of
float32 arrays (u16 name length, utf-8 name, u8 ndim, u32 dims, data).
Parameters and buffers are stored in sorted-name order so serialization is
byte-deterministic; loading is bit-exact for float32 modules."""

import struct

import numpy as np
import torch

CKPT_MAGIC = b"I3DCK1"
CKPT_VERSION = 1


def save_checkpoint(path, module: torch.nn.Module):
    state = module.state_dict()
    names = sorted(state.keys())
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(names)))
        for name in names:
            arr = state[name].detach().cpu().numpy().astype("<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path, module: torch.nn.Module):
    state = {}
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != CKPT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        version, count = struct.unpack("<II", f.read(8))
        if version != CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim)) if ndim else ()
            n_items = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(4 * n_items), dtype="<f4").reshape(shape)
            state[name] = torch.from_numpy(data.copy())
    missing = set(module.state_dict()) - set(state)
    if missing:
        raise ValueError(f"checkpoint missing parameters: {sorted(missing)[:3]}...")
    module.load_state_dict(state)
    return module


def state_checksum(module: torch.nn.Module) -> int:
    """Order-stable hash of all parameters/buffers, for stage-isolation checks."""
    import hashlib

    h = hashlib.sha256()
    state = module.state_dict()
    for name in sorted(state):
        h.update(name.encode())
        h.update(state[name].detach().cpu().numpy().astype("<f8").tobytes())
    return int.from_bytes(h.digest()[:8], "big")
