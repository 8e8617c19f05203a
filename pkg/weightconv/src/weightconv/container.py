"""SRWT1 / SRVC1 binary containers.

Both share the same layout: a 5-byte magic, a u8 version, a u32
little-endian manifest length, a UTF-8 JSON manifest, then contiguous
little-endian float32 blobs whose offsets are relative to the blob
section start. Files end exactly at the last blob and manifests are
name-sorted, so writing is byte-for-byte reproducible.

This is an independent implementation of the format (the consumer side
lives in the benchmark package); interoperability is covered by tests.
"""

from __future__ import annotations

import json

import numpy as np

WEIGHT_MAGIC = b"SRWT1"
VECTOR_MAGIC = b"SRVC1"
_VERSION = 1


class ContainerError(Exception):
    """Malformed container file."""


def _write(path, magic: bytes, header: dict, tensors: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        entries.append(
            {"name": name, "dims": list(arr.shape), "offset": offset, "len": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({**header, "tensors": entries}, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(magic)
        f.write(bytes([_VERSION]))
        f.write(len(manifest).to_bytes(4, "little"))
        f.write(manifest)
        for raw in blobs:
            f.write(raw)


def _read(path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 10 or data[:5] != magic:
        raise ContainerError(f"bad magic, expected {magic!r}")
    if data[5] != _VERSION:
        raise ContainerError(f"unsupported version {data[5]}")
    mlen = int.from_bytes(data[6:10], "little")
    manifest = json.loads(data[10 : 10 + mlen].decode())
    blob = data[10 + mlen :]
    tensors = {}
    end = 0
    for entry in manifest["tensors"]:
        dims = tuple(entry["dims"])
        arr = np.frombuffer(
            blob, dtype="<f4", count=entry["len"] // 4, offset=entry["offset"]
        )
        tensors[entry["name"]] = arr.reshape(dims).copy()
        end = max(end, entry["offset"] + entry["len"])
    if end != len(blob):
        raise ContainerError(f"{len(blob) - end} trailing bytes after last blob")
    return manifest, tensors


def write_srwt1(path, arch_tag: str, config: dict, tensors: dict, note: str = "") -> None:
    _write(path, WEIGHT_MAGIC, {"arch_tag": arch_tag, "config": config, "note": note}, tensors)


def read_srwt1(path) -> tuple[dict, dict[str, np.ndarray]]:
    return _read(path, WEIGHT_MAGIC)


def write_vector(path, arch_tag: str, meta: dict, input_t: np.ndarray, output_t: np.ndarray) -> None:
    header = {"arch_tag": arch_tag, **meta}
    _write(path, VECTOR_MAGIC, header, {"input": input_t, "output": output_t})


def read_vector(path) -> tuple[dict, np.ndarray, np.ndarray]:
    manifest, tensors = _read(path, VECTOR_MAGIC)
    if set(tensors) != {"input", "output"}:
        raise ContainerError(f"vector file must hold input+output, got {sorted(tensors)}")
    return manifest, tensors["input"], tensors["output"]
