"""Run the RRDB generator on a degraded plate with the tiny test weights.

The tiny-gen fixture is an 8-feature, 2-block generator with random
seed-pinned weights, so its output is not a trained restoration; the
point is the inference plumbing: SRWT1 loading, schema validation, 4x
shape contract, and reference-vs-optimized execution parity.
"""

import time
from pathlib import Path

import numpy as np

from platesr.degrade import PRESETS, degrade_pipeline
from platesr.imgcore import write_png
from platesr.ocr import render_plate
from platesr.srnet import GeneratorConfig, generator_forward, load_weights

weights_path = Path(__file__).parent.parent / "tests" / "fixtures" / "tiny-gen.srwt"
out = Path("demo_out/generator")
out.mkdir(parents=True, exist_ok=True)

store = load_weights(weights_path)
cfg = GeneratorConfig.from_dict(store.config)
print(f"loaded {len(store)} tensors, arch={store.arch_tag}")
print(f"config: feat={cfg.num_feat} blocks={cfg.num_blocks} growth={cfg.growth}")

hr = render_plate("GEN-2024")
lr = degrade_pipeline(hr, PRESETS["x4-paper"])
write_png(lr, out / "lr.png")
print(f"input: {lr.width}x{lr.height}")

t0 = time.perf_counter()
sr = generator_forward(lr, store, cfg)
dt_fast = time.perf_counter() - t0
write_png(sr, out / "sr_optimized.png")
print(f"optimized mode: {sr.width}x{sr.height} in {dt_fast * 1000:.0f} ms")

t0 = time.perf_counter()
sr_ref = generator_forward(lr, store, cfg, mode="reference")
dt_ref = time.perf_counter() - t0
delta = float(np.abs(sr.data - sr_ref.data).max())
print(f"reference mode: {dt_ref * 1000:.0f} ms, max abs difference {delta:.2e}")
print(f"\nimages written to {out}/")
