"""Walk through the degradation recipe stage by stage.

Shows what the blur, downscale, noise, JPEG, and sinc stages each do to a
plate crop, then runs the two shipped presets end to end. Every stage is
seeded, so rerunning this script reproduces the same bytes.
"""

import math
from pathlib import Path

from platesr import rng
from platesr.degrade import (
    PRESETS,
    BlurSpec,
    add_gaussian_noise,
    degrade_pipeline,
    gaussian_kernel,
    jpeg_cycle,
    sinc_kernel,
)
from platesr.imgcore import convolve2d, resize, write_png
from platesr.metrics import psnr
from platesr.ocr import render_plate

out = Path("demo_out/degradation")
out.mkdir(parents=True, exist_ok=True)

hr = render_plate("XYZ-5678", scale=2)
write_png(hr, out / "0_original.png")

blurred = convolve2d(hr, gaussian_kernel(BlurSpec("gaussian_iso", 1.2, 1.2, size=9)))
write_png(blurred.clamped(), out / "1_blur.png")
print(f"blur:      psnr {psnr(hr, blurred.clamped()):.1f} dB")

small = resize(blurred, hr.width // 4, hr.height // 4, "box")
write_png(small.clamped(), out / "2_downscale.png")
print(f"downscale: {small.width}x{small.height}")

noisy = add_gaussian_noise(small, 0.03, rng.stream(7))
write_png(noisy, out / "3_noise.png")

coded = jpeg_cycle(noisy, 60)
write_png(coded, out / "4_jpeg.png")

ringing = convolve2d(coded, sinc_kernel(math.pi / 2.5, 13)).clamped()
write_png(ringing, out / "5_sinc_ringing.png")

for name, cfg in PRESETS.items():
    lr = degrade_pipeline(hr, cfg)
    write_png(lr, out / f"preset_{name.replace('.', '_')}.png")
    print(f"preset {name}: {hr.width}x{hr.height} -> {lr.width}x{lr.height}")

print(f"\nimages written to {out}/")
