"""Resampling filters side by side.

Renders a plate, downscales it 4x with the box filter, then brings it
back up with each interpolation filter so the sharpness differences are
visible. Outputs land in demo_out/.
"""

from pathlib import Path

from platesr.imgcore import resize, write_png
from platesr.metrics import psnr, ssim
from platesr.ocr import render_plate

out = Path("demo_out/resampling")
out.mkdir(parents=True, exist_ok=True)

hr = render_plate("ABC-1234")
write_png(hr, out / "original.png")
print(f"original: {hr.width}x{hr.height}")

lr = resize(hr, hr.width // 4, hr.height // 4, "box")
write_png(lr, out / "lr_x4.png")
print(f"low-res:  {lr.width}x{lr.height} (box downscale)")

for filt in ("nearest", "bilinear", "bicubic"):
    up = resize(lr, hr.width, hr.height, filt).clamped()
    write_png(up, out / f"up_{filt}.png")
    print(
        f"{filt:9s} upscale: psnr={psnr(hr, up):6.2f} dB  ssim={ssim(hr, up):.4f}"
    )

print(f"\nimages written to {out}/")
