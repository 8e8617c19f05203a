"""Checkpoint conversion and test-vector emission."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import archs
from .container import read_vector, write_srwt1, write_vector
from .maps import (
    _DISC_RENAME,
    ConversionError,
    map_layers,
    materialize_spectral_norm,
    unwrap_state_dict,
)

VECTOR_INPUT_HW = 16  # seeded test inputs are 16x16


def _load_state_dict(checkpoint_path) -> dict[str, np.ndarray]:
    try:
        raw = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ConversionError(f"cannot deserialize checkpoint: {exc}")
    sd = unwrap_state_dict(raw)
    if not isinstance(sd, dict) or not sd:
        raise ConversionError("checkpoint holds no state dict")
    arrays = {}
    for name, tensor in sd.items():
        if not torch.is_tensor(tensor):
            raise ConversionError(f"entry {name!r} is not a tensor")
        arrays[name.removeprefix("module.")] = tensor.detach().cpu().numpy()
    return arrays


def convert(checkpoint_path, arch: str, out_path) -> dict:
    """Convert a source checkpoint into an SRWT1 file; returns the
    inferred config echoed into the manifest."""
    sd = materialize_spectral_norm(_load_state_dict(checkpoint_path))
    tensors, config = map_layers(arch, sd)
    note = f"converted from {Path(checkpoint_path).name}"
    write_srwt1(out_path, arch, config, tensors, note=note)
    return config


def _plain_disc_module(arch: str, config: dict) -> nn.Module:
    """Discriminator skeleton with spectral norm stripped and biases
    everywhere, geometry unchanged, so it accepts materialized tensors."""
    module = archs.build_module(arch, config)

    def plain(conv: nn.Conv2d) -> nn.Conv2d:
        return nn.Conv2d(
            conv.in_channels,
            conv.out_channels,
            conv.kernel_size,
            conv.stride,
            conv.padding,
            bias=True,
        )

    for name in ("conv1", "conv2", "conv3", "conv4", "conv5", "conv6", "conv7", "conv8"):
        setattr(module, name, plain(getattr(module, name)))
    return module


def _reference_forward(arch: str, config: dict, tensors: dict, x: torch.Tensor) -> torch.Tensor:
    """Source-framework forward over the materialized, renamed tensors."""
    if arch == "rrdb_gen":
        module = archs.build_module(arch, config)
        state = {k: torch.from_numpy(v.copy()) for k, v in tensors.items()}
    else:
        module = _plain_disc_module(arch, config)
        back = {v: k for k, v in _DISC_RENAME.items()}
        state = {}
        for name, tensor in tensors.items():
            stem, _, leaf = name.rpartition(".")
            state[f"{back.get(stem, stem)}.{leaf}"] = torch.from_numpy(tensor.copy())
    module.load_state_dict(state)
    module.eval()
    with torch.no_grad():
        return module(x)


def emit_test_vector(checkpoint_path, arch: str, seed: int, out_path) -> dict:
    """Emit {seeded input, source-framework forward output} for parity
    checks against independent inference engines.

    Generator outputs are clamped to [0, 1] and discriminator maps pass
    through a sigmoid, so vectors live in the same space downstream
    consumers produce.
    """
    sd = materialize_spectral_norm(_load_state_dict(checkpoint_path))
    tensors, config = map_layers(arch, sd)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x_np = rng.random((1, config["in_ch"], VECTOR_INPUT_HW, VECTOR_INPUT_HW)).astype(np.float32)
    x = torch.from_numpy(x_np)

    out = _reference_forward(arch, config, tensors, x)
    if arch == "rrdb_gen":
        out = out.clamp(0.0, 1.0)
        output_space = "clamped [0,1]"
    else:
        out = torch.sigmoid(out)
        output_space = "sigmoid realness"

    meta = {
        "config": config,
        "seed": int(seed),
        "input_space": "uniform [0,1)",
        "output_space": output_space,
        "source": Path(checkpoint_path).name,
    }
    write_vector(out_path, arch, meta, x_np, out.numpy().astype(np.float32))
    return meta


def check_vector_matches(vector_path, arch: str, config: dict) -> None:
    """Validate a vector file against an architecture before using it."""
    manifest, x, _ = read_vector(vector_path)
    if manifest.get("arch_tag") != arch:
        raise ConversionError(
            f"vector is for arch {manifest.get('arch_tag')!r}, expected {arch!r}"
        )
    want = (1, config["in_ch"], VECTOR_INPUT_HW, VECTOR_INPUT_HW)
    if tuple(x.shape) != want:
        raise ConversionError(f"vector input dims {tuple(x.shape)} do not match {want}")
