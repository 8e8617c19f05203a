import numpy as np
import scipy.ndimage

from platesr.imgcore import ImageF32


def natural_image(seed: int, channels: int = 3, h: int = 48, w: int = 64) -> ImageF32:
    """Smooth random field standing in for a natural photo fixture."""
    rng = np.random.default_rng(seed)
    base = np.cumsum(rng.normal(0.0, 0.05, (channels, h, w)), axis=2)
    base += np.cumsum(rng.normal(0.0, 0.02, (channels, h, w)), axis=1)
    base = scipy.ndimage.gaussian_filter(base, sigma=(0, 1.0, 1.0))
    lo, hi = base.min(), base.max()
    return ImageF32(((base - lo) / (hi - lo)).astype(np.float32))
