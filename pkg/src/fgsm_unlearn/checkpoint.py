"""Single-file model checkpoints.

Layout (little-endian): 4-byte magic "ULRN" | u32 format version |
u64 header length | UTF-8 JSON header | raw float32 payload. The header
carries a tensor manifest (name, shape, byte offset, byte length), the Adam
step counter, and a free-form string-to-string meta map. Round-trips are
bit-exact.
"""

import json
import struct

import numpy as np

from .errors import BadMagicError, ManifestError, TruncatedError, VersionError
from .lenet import PARAM_NAMES, LeNetParams
from .ops import AdamState

MAGIC = b"ULRN"
VERSION = 1


def save_checkpoint(params: LeNetParams, adam: AdamState, meta: dict[str, str], path: str) -> None:
    """Write params + optimizer state + meta to a single file."""
    tensors: list[tuple[str, np.ndarray]] = []
    for name in PARAM_NAMES:
        tensors.append((name, getattr(params, name)))
    for name in PARAM_NAMES:
        tensors.append((f"adam.m.{name}", adam.m[name]))
        tensors.append((f"adam.v.{name}", adam.v[name]))

    manifest = []
    offset = 0
    blobs = []
    for name, arr in tensors:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest.append(
            {"name": name, "shape": list(arr.shape), "byte_offset": offset, "byte_length": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)

    header = json.dumps(
        {"tensors": manifest, "adam_t": adam.t, "meta": dict(meta)}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path: str) -> tuple[LeNetParams, AdamState, dict[str, str]]:
    """Read a checkpoint written by save_checkpoint."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: magic {raw[:4]!r} != {MAGIC!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise VersionError(f"{path}: format version {version}, supported {VERSION}")
    (header_len,) = struct.unpack_from("<Q", raw, 8)
    header_end = 16 + header_len
    if len(raw) < header_end:
        raise TruncatedError(f"{path}: header promises {header_len} bytes, file too short")
    header = json.loads(raw[16:header_end].decode("utf-8"))
    payload = raw[header_end:]

    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start, length = entry["byte_offset"], entry["byte_length"]
        if start + length > len(payload):
            raise TruncatedError(f"{path}: tensor {entry['name']} exceeds payload")
        arr = np.frombuffer(payload[start : start + length], dtype="<f4")
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise ManifestError(f"{path}: tensor {entry['name']} length/shape mismatch")
        arrays[entry["name"]] = arr.reshape(shape).copy()

    missing = [n for n in PARAM_NAMES if n not in arrays]
    if missing:
        raise ManifestError(f"{path}: manifest missing parameter tensors {missing}")
    params = LeNetParams.from_dict(arrays)
    try:
        adam = AdamState(
            m={n: arrays[f"adam.m.{n}"] for n in PARAM_NAMES},
            v={n: arrays[f"adam.v.{n}"] for n in PARAM_NAMES},
            t=int(header["adam_t"]),
        )
    except KeyError as e:
        raise ManifestError(f"{path}: manifest missing optimizer tensor {e}") from None
    return params, adam, dict(header.get("meta", {}))
