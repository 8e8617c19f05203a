"""Layer maps from source checkpoints to SRWT1 names.

Each architecture defines a bijective rename over its layer set plus a
config-inference rule that reads channel counts and block depth straight
off the tensor shapes. Spectral-norm parametrizations are materialized
(weight = weight_orig / sigma(u, v)), matching eval-time behavior, and
bias-free source convs receive explicit zero biases.

The generator and plain discriminator maps follow the published basicsr
checkpoints; the attention map follows this package's reference
implementation (published A-ESRGAN multi-discriminator naming varies and
can be added as an extra map).
"""

from __future__ import annotations

import re

import numpy as np

ARCHES = ("rrdb_gen", "unet_disc", "attn_unet_disc")


class ConversionError(Exception):
    """Checkpoint cannot be converted."""


class MappingError(ConversionError):
    """Layer set does not match the architecture; carries the diff."""

    def __init__(self, arch: str, unknown: list[str], missing: list[str]):
        self.unknown = sorted(unknown)
        self.missing = sorted(missing)
        parts = [f"checkpoint does not match arch {arch!r}"]
        if self.missing:
            parts.append(f"missing: {', '.join(self.missing[:8])}")
        if self.unknown:
            parts.append(f"unknown: {', '.join(self.unknown[:8])}")
        super().__init__("; ".join(parts))


def unwrap_state_dict(raw: dict) -> dict:
    """Unwrap basicsr-style {'params_ema': ...} / {'params': ...} files."""
    for key in ("params_ema", "params"):
        if key in raw and isinstance(raw[key], dict):
            return raw[key]
    return raw


def materialize_spectral_norm(sd: dict) -> dict:
    """Replace weight_orig/u/v triples with the effective weight."""
    out = {}
    for name, tensor in sd.items():
        if name.endswith(".weight_orig"):
            base = name[: -len("_orig")]
            stem = name[: -len(".weight_orig")]
            u = sd.get(f"{stem}.weight_u")
            v = sd.get(f"{stem}.weight_v")
            w = np.asarray(tensor, dtype=np.float64)
            if u is None or v is None:
                out[base] = w.astype(np.float32)
                continue
            mat = w.reshape(w.shape[0], -1)
            sigma = float(np.asarray(u, dtype=np.float64) @ (mat @ np.asarray(v, dtype=np.float64)))
            out[base] = (w / sigma).astype(np.float32)
        elif name.endswith((".weight_u", ".weight_v")):
            continue
        else:
            out[name] = np.asarray(tensor, dtype=np.float32)
    return out


# ---------------------------------------------------------------------------
# Config inference and expected layer sets
# ---------------------------------------------------------------------------

_BODY_RE = re.compile(r"^body\.(\d+)\.rdb[123]\.conv[1-5]\.(weight|bias)$")


def _infer_generator(sd: dict) -> dict:
    try:
        first = sd["conv_first.weight"]
        growth = sd["body.0.rdb1.conv1.weight"].shape[0]
        out_ch = sd["conv_last.weight"].shape[0]
    except KeyError as exc:
        raise ConversionError(f"not an RRDB generator checkpoint: missing {exc}")
    blocks = -1
    for name in sd:
        m = _BODY_RE.match(name)
        if m:
            blocks = max(blocks, int(m.group(1)))
    return {
        "in_ch": int(first.shape[1]),
        "out_ch": int(out_ch),
        "num_feat": int(first.shape[0]),
        "num_blocks": blocks + 1,
        "growth": int(growth),
        "scale": 4,
        "beta": 0.2,
    }


def _generator_schema(cfg: dict) -> dict[str, tuple[int, ...]]:
    nf, g = cfg["num_feat"], cfg["growth"]
    schema = {}

    def conv(name, cout, cin):
        schema[f"{name}.weight"] = (cout, cin, 3, 3)
        schema[f"{name}.bias"] = (cout,)

    conv("conv_first", nf, cfg["in_ch"])
    for i in range(cfg["num_blocks"]):
        for j in (1, 2, 3):
            for k in range(1, 6):
                cin = nf + (k - 1) * g
                cout = g if k < 5 else nf
                conv(f"body.{i}.rdb{j}.conv{k}", cout, cin)
    conv("conv_body", nf, nf)
    conv("conv_up1", nf, nf)
    conv("conv_up2", nf, nf)
    conv("conv_hr", nf, nf)
    conv("conv_last", cfg["out_ch"], nf)
    return schema


def _infer_discriminator(sd: dict) -> dict:
    try:
        first = sd["conv0.weight"]
    except KeyError as exc:
        raise ConversionError(f"not a U-Net discriminator checkpoint: missing {exc}")
    return {"in_ch": int(first.shape[1]), "num_feat": int(first.shape[0])}


# source name -> target name for the U-Net discriminators; bias-free
# source convs get zero biases synthesized under the target name.
_DISC_RENAME = {
    "conv0": "conv0",
    "conv1": "down1",
    "conv2": "down2",
    "conv3": "down3",
    "conv4": "up3",
    "conv5": "up2",
    "conv6": "up1",
    "conv7": "tail1",
    "conv8": "tail2",
    "conv9": "conv_out",
}


def _discriminator_schema(cfg: dict, attention: bool) -> dict[str, tuple[int, ...]]:
    nf = cfg["num_feat"]
    schema = {}

    def conv(name, cout, cin, k):
        schema[f"{name}.weight"] = (cout, cin, k, k)
        schema[f"{name}.bias"] = (cout,)

    conv("conv0", nf, cfg["in_ch"], 3)
    conv("down1", 2 * nf, nf, 4)
    conv("down2", 4 * nf, 2 * nf, 4)
    conv("down3", 8 * nf, 4 * nf, 4)
    conv("up3", 4 * nf, 8 * nf, 3)
    conv("up2", 2 * nf, 4 * nf, 3)
    conv("up1", nf, 2 * nf, 3)
    conv("tail1", nf, nf, 3)
    conv("tail2", nf, nf, 3)
    conv("conv_out", 1, nf, 3)
    if attention:
        for idx, (skip_ch, gate_ch) in enumerate(
            [(nf, 2 * nf), (2 * nf, 4 * nf), (4 * nf, 8 * nf)], start=1
        ):
            inter = max(1, skip_ch // 2)
            conv(f"att{idx}.theta", inter, skip_ch, 1)
            conv(f"att{idx}.phi", inter, gate_ch, 1)
            conv(f"att{idx}.psi", 1, inter, 1)
    return schema


def _rename_discriminator(sd: dict) -> dict:
    out = {}
    for name, tensor in sd.items():
        stem, _, leaf = name.rpartition(".")
        if stem in _DISC_RENAME and leaf in ("weight", "bias"):
            out[f"{_DISC_RENAME[stem]}.{leaf}"] = tensor
        else:
            out[name] = tensor
    # synthesize zero biases for the bias-free spectral-norm convs
    for target in _DISC_RENAME.values():
        wname, bname = f"{target}.weight", f"{target}.bias"
        if wname in out and bname not in out:
            out[bname] = np.zeros(out[wname].shape[0], dtype=np.float32)
    return out


def infer_config(arch: str, sd: dict) -> dict:
    if arch == "rrdb_gen":
        return _infer_generator(sd)
    if arch in ("unet_disc", "attn_unet_disc"):
        return _infer_discriminator(sd)
    raise ConversionError(f"unknown arch {arch!r}, expected one of {ARCHES}")


def map_layers(arch: str, sd: dict) -> tuple[dict, dict]:
    """Rename a materialized state dict; returns (tensors, config).

    Raises MappingError listing the layer diff when the checkpoint does
    not cover the architecture bijectively, and ConversionError on shape
    conflicts.
    """
    if arch == "rrdb_gen":
        mapped = dict(sd)
        anchors = ("conv_first.weight", "body.0.rdb1.conv1.weight", "conv_last.weight")
        if any(a not in mapped for a in anchors):
            raise MappingError(
                arch,
                unknown=[n for n in mapped if not (_BODY_RE.match(n) or n.startswith("conv_"))],
                missing=[a for a in anchors if a not in mapped],
            )
        config = _infer_generator(mapped)
        schema = _generator_schema(config)
    else:
        mapped = _rename_discriminator(sd)
        config = _infer_discriminator(mapped)
        config["variant"] = "attention" if arch == "attn_unet_disc" else "plain"
        schema = _discriminator_schema(config, arch == "attn_unet_disc")

    unknown = [n for n in mapped if n not in schema]
    missing = [n for n in schema if n not in mapped]
    if unknown or missing:
        raise MappingError(arch, unknown, missing)
    for name, want in schema.items():
        got = tuple(mapped[name].shape)
        if got != want:
            raise ConversionError(f"layer {name!r} has shape {got}, expected {want}")
    return mapped, config
