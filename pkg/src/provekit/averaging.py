"""Checkpoint interpolation (1-alpha)*base + alpha*tuned and a bit-exact
container format.

File layout: magic `GPCK`, u32 version, u64 header length, UTF-8 JSON header
{"tensors": [{"name", "shape", "offset", "len"}], "metadata": {...}},
concatenated little-endian float32 payloads, then a SHA-256 digest of all
preceding bytes. Offsets are relative to the start of the payload section.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, DigestMismatch, FormatError, KeyMismatch, ShapeMismatch

MAGIC = b"GPCK"
VERSION = 1
_DIGEST_LEN = 32


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]  # name -> float32 array, insertion-ordered
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, arr in self.tensors.items():
            if arr.dtype != np.float32:
                raise FormatError(f"tensor {name!r} is not float32")


def digest(ckpt: Checkpoint) -> str:
    """Content digest over tensor names, shapes and raw payloads."""
    h = hashlib.sha256()
    for name, arr in ckpt.tensors.items():
        h.update(name.encode())
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def average(base: Checkpoint, tuned: Checkpoint, alpha: float) -> Checkpoint:
    """Element-wise (1-alpha)*base + alpha*tuned, accumulated in float64."""
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha={alpha} outside [0, 1]")
    base_keys, tuned_keys = set(base.tensors), set(tuned.tensors)
    if base_keys != tuned_keys:
        missing = sorted(base_keys ^ tuned_keys)
        raise KeyMismatch(f"tensor name sets differ: {missing}")
    bad_shapes = [
        name for name in base.tensors
        if base.tensors[name].shape != tuned.tensors[name].shape
    ]
    if bad_shapes:
        raise ShapeMismatch(f"shape mismatch for tensors: {sorted(bad_shapes)}")
    out = {}
    w_base = 1.0 - alpha
    for name, b in base.tensors.items():
        t = tuned.tensors[name]
        if alpha == 0.0:  # endpoint identities are bitwise, not just close
            mixed32 = b.copy()
        elif alpha == 1.0:
            mixed32 = t.copy()
        else:
            mixed = w_base * b.astype(np.float64) + alpha * t.astype(np.float64)
            mixed32 = mixed.astype(np.float32)
        out[name] = mixed32
    meta = {
        "alpha": repr(alpha),
        "base_digest": digest(base),
        "tuned_digest": digest(tuned),
    }
    return Checkpoint(out, meta)


def sweep(base: Checkpoint, tuned: Checkpoint, alphas: list[float]) -> list[Checkpoint]:
    return [average(base, tuned, a) for a in alphas]


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    """Atomic write via temp file + rename."""
    entries = []
    payloads = []
    offset = 0
    for name, arr in ckpt.tensors.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "offset": offset,
            "len": len(raw),
        })
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"tensors": entries, "metadata": ckpt.metadata},
        ensure_ascii=False, sort_keys=True,
    ).encode("utf-8")

    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", VERSION)
    body += struct.pack("<Q", len(header))
    body += header
    for raw in payloads:
        body += raw
    body += hashlib.sha256(bytes(body)).digest()

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(body))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 + 8 + _DIGEST_LEN:
        raise FormatError("file too short for header", offset=len(blob))
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}", offset=0)
    version = struct.unpack_from("<I", blob, 4)[0]
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    header_len = struct.unpack_from("<Q", blob, 8)[0]
    header_end = 16 + header_len
    if header_end + _DIGEST_LEN > len(blob):
        raise FormatError("truncated header", offset=len(blob))

    stored = blob[-_DIGEST_LEN:]
    computed = hashlib.sha256(blob[:-_DIGEST_LEN]).digest()
    if stored != computed:
        raise DigestMismatch(
            f"digest mismatch: stored {stored.hex()}, computed {computed.hex()}"
        )

    try:
        header = json.loads(blob[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"unreadable header: {exc}", offset=16) from exc

    payload = blob[header_end:-_DIGEST_LEN]
    tensors = {}
    for entry in header["tensors"]:
        start, length = entry["offset"], entry["len"]
        if start + length > len(payload):
            raise FormatError(f"tensor {entry['name']!r} overruns payload",
                              offset=header_end + start)
        flat = np.frombuffer(payload[start:start + length], dtype="<f4")
        shape = tuple(entry["shape"])
        if int(np.prod(shape, dtype=np.int64)) != flat.size:
            raise FormatError(f"tensor {entry['name']!r} shape/{flat.size} mismatch",
                              offset=header_end + start)
        tensors[entry["name"]] = flat.reshape(shape).astype(np.float32)
    return Checkpoint(tensors, dict(header.get("metadata", {})))
