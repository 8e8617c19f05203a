"""Regenerate the committed network fixtures under tests/fixtures/.

Golden outputs are computed with the reference (per-output scalar)
execution mode, which is the in-tree ground truth. Weights are seeded
Philox draws, so reruns reproduce the same bytes.

Run from the repo root:  python3 tests/make_fixtures.py
"""

from pathlib import Path

import numpy as np

from platesr import rng as rng_mod
from platesr.imgcore import ImageF32
from platesr.srnet import (
    DiscriminatorConfig,
    GeneratorConfig,
    WeightStore,
    discriminator_schema,
    generator_forward,
    generator_schema,
    save_weights,
    unet_discriminator_forward,
)

FIXTURES = Path(__file__).parent / "fixtures"

TINY_GEN = GeneratorConfig(num_feat=8, num_blocks=2, growth=4)
TINY_DISC_PLAIN = DiscriminatorConfig(num_feat=4, variant="plain")
TINY_DISC_ATTN = DiscriminatorConfig(num_feat=4, variant="attention")


def _draw_tensors(schema, seed_token, scale=0.1):
    rng = rng_mod.stream(2024, seed_token)
    return {
        name: (rng.standard_normal(shape) * scale).astype(np.float32)
        for name, shape in sorted(schema.items())
    }


def tiny_gen_store() -> WeightStore:
    tensors = _draw_tensors(generator_schema(TINY_GEN), "tiny-gen")
    return WeightStore("rrdb_gen", TINY_GEN.to_dict(), tensors, note="test fixture")


def tiny_gen_zero_body_store() -> WeightStore:
    store = tiny_gen_store()
    tensors = {
        name: (np.zeros_like(t) if name.startswith(("body.", "conv_body.")) else t)
        for name, t in store.tensors.items()
    }
    return WeightStore(store.arch_tag, store.config, tensors, note="zero body fixture")


def tiny_gen_input() -> ImageF32:
    rng = rng_mod.stream(2024, "tiny-gen-input")
    return ImageF32(rng.random((3, 8, 8)).astype(np.float32))


def tiny_disc_store(cfg: DiscriminatorConfig) -> WeightStore:
    tensors = _draw_tensors(discriminator_schema(cfg), f"tiny-disc-{cfg.variant}", 0.2)
    tag = "attn_unet_disc" if cfg.variant == "attention" else "unet_disc"
    return WeightStore(tag, cfg.to_dict(), tensors, note="test fixture")


def tiny_disc_input() -> ImageF32:
    rng = rng_mod.stream(2024, "tiny-disc-input")
    return ImageF32(rng.random((3, 24, 16)).astype(np.float32))


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)

    store = tiny_gen_store()
    save_weights(store, FIXTURES / "tiny-gen.srwt")
    lr = tiny_gen_input()
    golden = generator_forward(lr, store, TINY_GEN, mode="reference")
    np.save(FIXTURES / "tiny-gen-input.npy", lr.data)
    np.save(FIXTURES / "tiny-gen-golden.npy", golden.data)

    zero_body = tiny_gen_zero_body_store()
    save_weights(zero_body, FIXTURES / "tiny-gen-zero-body.srwt")
    golden_zb = generator_forward(lr, zero_body, TINY_GEN, mode="reference")
    np.save(FIXTURES / "tiny-gen-zero-body-golden.npy", golden_zb.data)

    img = tiny_disc_input()
    np.save(FIXTURES / "tiny-disc-input.npy", img.data)
    for cfg, name in ((TINY_DISC_PLAIN, "plain"), (TINY_DISC_ATTN, "attn")):
        dstore = tiny_disc_store(cfg)
        save_weights(dstore, FIXTURES / f"tiny-disc-{name}.srwt")
        out = unet_discriminator_forward(img, dstore, cfg, mode="reference")
        np.save(FIXTURES / f"tiny-disc-{name}-golden.npy", out.data)

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
