"""Binary checkpoint files for named float64 tensors.

Layout, all little-endian:

    magic  b"CGRU"
    u32    format version (currently 1)
    u32    tensor count
    per tensor:
        u32    name length in bytes
        bytes  utf-8 name
        u64    rank
        u64[]  dims
        f64[]  row-major payload

Writing the same tensors twice produces byte-identical files.
"""

import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"CGRU"
VERSION = 1


def save_tensors(path, tensors: dict) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(tensors))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        enc = name.encode("utf-8")
        blob += struct.pack("<I", len(enc))
        blob += enc
        blob += struct.pack("<Q", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += arr.tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_tensors(path) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    off = 4

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"{path}: truncated at byte {off}")
        out = blob[off:off + n]
        off += n
        return out

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<Q", take(8))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        size = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * size), dtype="<f8").reshape(dims)
        tensors[name] = data.astype(np.float64)
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return tensors


def save_network(path, net) -> None:
    save_tensors(path, net.params)


def load_network(path, net) -> None:
    """Load params into an already-constructed network of the same shape."""
    tensors = load_tensors(path)
    if set(tensors) != set(net.params):
        missing = sorted(set(net.params) - set(tensors))
        extra = sorted(set(tensors) - set(net.params))
        raise CheckpointError(
            f"{path}: param names do not match (missing {missing}, extra {extra})")
    for name, arr in tensors.items():
        if arr.shape != net.params[name].shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {arr.shape}, "
                f"expected {net.params[name].shape}")
        net.params[name] = arr
