"""License-plate super-resolution benchmark pipeline.

Degrades high-resolution plate crops into low-resolution blurred images,
restores them with interpolation baselines or RRDB generator inference,
recognizes the plate string, and scores models with confusion-matrix
metrics plus PSNR/SSIM.
"""

__version__ = "0.1.0"
