"""Named-tensor weight container and the SRWT1 file format.

SRWT1 layout:

    bytes 0-4   magic "SRWT1"
    byte  5     u8 version (= 1)
    bytes 6-9   u32 little-endian manifest length
    ...         UTF-8 JSON manifest
                {arch_tag, config, note, tensors: [{name, dims, offset, len}]}
    ...         contiguous little-endian float32 blobs

Tensor offsets are relative to the start of the blob section, lengths are
in bytes, and the file must end exactly at the last blob. The manifest is
written name-sorted so saving is byte-for-byte reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import WeightFormatError, WeightSchemaError

_MAGIC = b"SRWT1"
_VERSION = 1
_HEADER_LEN = len(_MAGIC) + 1 + 4


@dataclass
class WeightStore:
    """Immutable-by-convention map from dotted layer path to float32 tensor."""

    arch_tag: str
    config: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    note: str = ""

    def get(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise WeightSchemaError(f"missing weight tensor {name!r}") from None

    def slice(self, prefix: str) -> "WeightStore":
        """Sub-store of tensors under `prefix.`, with the prefix stripped."""
        cut = len(prefix) + 1
        sub = {
            name[cut:]: t
            for name, t in self.tensors.items()
            if name.startswith(prefix + ".")
        }
        if not sub:
            raise WeightSchemaError(f"no weight tensors under prefix {prefix!r}")
        return WeightStore(self.arch_tag, self.config, sub, self.note)

    def __len__(self) -> int:
        return len(self.tensors)


def save_weights(store: WeightStore, path) -> None:
    names = sorted(store.tensors)
    entries = []
    offset = 0
    blobs = []
    for name in names:
        t = np.ascontiguousarray(store.tensors[name], dtype="<f4")
        raw = t.tobytes()
        entries.append(
            {"name": name, "dims": list(t.shape), "offset": offset, "len": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps(
        {
            "arch_tag": store.arch_tag,
            "config": store.config,
            "note": store.note,
            "tensors": entries,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(bytes([_VERSION]))
        f.write(len(manifest).to_bytes(4, "little"))
        f.write(manifest)
        for raw in blobs:
            f.write(raw)


def load_weights(path) -> WeightStore:
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < _HEADER_LEN:
        raise WeightFormatError(
            f"file truncated: {len(data)} bytes is shorter than the header", offset=len(data)
        )
    if data[:5] != _MAGIC:
        raise WeightFormatError(f"bad magic {data[:5]!r}, expected {_MAGIC!r}", offset=0)
    if data[5] != _VERSION:
        raise WeightFormatError(f"unsupported version {data[5]}", offset=5)
    manifest_len = int.from_bytes(data[6:10], "little")
    blob_start = _HEADER_LEN + manifest_len
    if blob_start > len(data):
        raise WeightFormatError(
            f"manifest length {manifest_len} runs past end of file", offset=6
        )
    try:
        manifest = json.loads(data[_HEADER_LEN:blob_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"manifest is not valid JSON: {exc}", offset=_HEADER_LEN)

    for key in ("arch_tag", "config", "tensors"):
        if key not in manifest:
            raise WeightFormatError(f"manifest missing key {key!r}", offset=_HEADER_LEN)

    blob = data[blob_start:]
    tensors: dict[str, np.ndarray] = {}
    end = 0
    for entry in manifest["tensors"]:
        name = entry["name"]
        dims = tuple(int(d) for d in entry["dims"])
        offset = int(entry["offset"])
        length = int(entry["len"])
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor name {name!r}", offset=_HEADER_LEN)
        expected = 4 * int(np.prod(dims)) if dims else 4
        if length != expected:
            raise WeightFormatError(
                f"tensor {name!r}: blob length {length} != 4 * prod{dims} = {expected}",
                offset=blob_start + offset,
            )
        if offset + length > len(blob):
            raise WeightFormatError(
                f"manifest declares {len(manifest['tensors'])} tensors but the blob "
                f"section ends before {name!r}",
                offset=blob_start + offset,
            )
        arr = np.frombuffer(blob, dtype="<f4", count=length // 4, offset=offset)
        tensors[name] = arr.reshape(dims).copy()
        end = max(end, offset + length)
    if end != len(blob):
        raise WeightFormatError(
            f"file does not end at the last blob: {len(blob) - end} trailing bytes",
            offset=blob_start + end,
        )
    return WeightStore(
        arch_tag=str(manifest["arch_tag"]),
        config=dict(manifest["config"]),
        tensors=tensors,
        note=str(manifest.get("note", "")),
    )


# ---------------------------------------------------------------------------
# Architecture schemas
# ---------------------------------------------------------------------------


def generator_schema(cfg) -> dict[str, tuple[int, ...]]:
    """Expected tensor shapes for the RRDB generator, keyed by layer path."""
    nf, g = cfg.num_feat, cfg.growth
    schema: dict[str, tuple[int, ...]] = {}

    def conv(name: str, cout: int, cin: int, k: int = 3) -> None:
        schema[f"{name}.weight"] = (cout, cin, k, k)
        schema[f"{name}.bias"] = (cout,)

    conv("conv_first", nf, cfg.in_ch)
    for i in range(cfg.num_blocks):
        for j in (1, 2, 3):
            for k in range(1, 6):
                cin = nf + (k - 1) * g
                cout = g if k < 5 else nf
                conv(f"body.{i}.rdb{j}.conv{k}", cout, cin)
    conv("conv_body", nf, nf)
    conv("conv_up1", nf, nf)
    conv("conv_up2", nf, nf)
    conv("conv_hr", nf, nf)
    conv("conv_last", cfg.out_ch, nf)
    return schema


def discriminator_schema(cfg) -> dict[str, tuple[int, ...]]:
    """Expected tensor shapes for the U-Net discriminator (plain or
    attention variant)."""
    nf = cfg.num_feat
    schema: dict[str, tuple[int, ...]] = {}

    def conv(name: str, cout: int, cin: int, k: int) -> None:
        schema[f"{name}.weight"] = (cout, cin, k, k)
        schema[f"{name}.bias"] = (cout,)

    conv("conv0", nf, cfg.in_ch, 3)
    conv("down1", 2 * nf, nf, 4)
    conv("down2", 4 * nf, 2 * nf, 4)
    conv("down3", 8 * nf, 4 * nf, 4)
    conv("up3", 4 * nf, 8 * nf, 3)
    conv("up2", 2 * nf, 4 * nf, 3)
    conv("up1", nf, 2 * nf, 3)
    conv("tail1", nf, nf, 3)
    conv("tail2", nf, nf, 3)
    conv("conv_out", 1, nf, 3)
    if cfg.variant == "attention":
        for idx, (skip_ch, gate_ch) in enumerate(
            [(nf, 2 * nf), (2 * nf, 4 * nf), (4 * nf, 8 * nf)], start=1
        ):
            inter = max(1, skip_ch // 2)
            conv(f"att{idx}.theta", inter, skip_ch, 1)
            conv(f"att{idx}.phi", inter, gate_ch, 1)
            conv(f"att{idx}.psi", 1, inter, 1)
    return schema


def validate_schema(store: WeightStore, schema: dict[str, tuple[int, ...]]) -> None:
    """Raise WeightSchemaError naming the first offending layer (sorted)."""
    names = sorted(set(schema) | set(store.tensors))
    for name in names:
        if name not in store.tensors:
            raise WeightSchemaError(f"missing layer {name!r}")
        if name not in schema:
            raise WeightSchemaError(f"unexpected layer {name!r}")
        got = tuple(store.tensors[name].shape)
        want = schema[name]
        if got != want:
            raise WeightSchemaError(f"layer {name!r} has shape {got}, expected {want}")
