"""Binary parameter checkpoints.

Layout (all integers unsigned 32-bit little-endian)::

    b"MUSTR1"
    repeated until end of file:
        name_len        uint32
        name            name_len bytes, UTF-8
        rank            uint32
        shape           rank x uint32
        data            prod(shape) x float32, little-endian, C order
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import ParseError

MAGIC = b"MUSTR1"


def save_checkpoint(path, named_params: Iterable[tuple[str, object]]) -> None:
    chunks = [MAGIC]
    for name, param in named_params:
        arr = np.asarray(getattr(param, "data", param), dtype="<f4")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if not buf.startswith(MAGIC):
        raise ParseError("not a checkpoint (bad magic)", path=path)
    pos = len(MAGIC)
    out: dict[str, np.ndarray] = {}
    try:
        while pos < len(buf):
            (n,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}I", buf, pos)
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(shape)
            pos += 4 * count
            out[name] = arr.astype(np.float32)
    except (struct.error, ValueError) as exc:
        raise ParseError(f"truncated checkpoint at byte {pos}", path=path) from exc
    return out


def load_into(module, path, strict: bool = True) -> None:
    state = load_checkpoint(path)
    for name, param in module.named_parameters():
        if name not in state:
            if strict:
                raise ParseError(f"checkpoint is missing parameter {name!r}", path=path)
            continue
        if state[name].shape != param.shape:
            raise ParseError(f"shape mismatch for {name}: {state[name].shape} vs {param.shape}", path=path)
        param.data = state[name].astype(param.dtype)
