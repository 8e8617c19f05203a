"""From-scratch forward-pass inference for ESRGAN-family generators and
U-Net discriminators, plus the SRWT1 weight container.

Two execution modes exist everywhere: "optimized" (windowed tensordot)
and "reference" (per-output accumulation), selectable per call. The
reference mode is the in-tree ground truth the optimized kernels are
checked against.
"""

from .ops import (
    EXECUTION_MODES,
    avgpool2x,
    bilinear_upsample2x,
    conv2d,
    leaky_relu,
    nearest_upsample2x,
    sigmoid,
)
from .weights import (
    WeightStore,
    discriminator_schema,
    generator_schema,
    load_weights,
    save_weights,
    validate_schema,
)
from .blocks import (
    DiscriminatorConfig,
    GeneratorConfig,
    attention_gate,
    generator_forward,
    rdb_forward,
    rrdb_forward,
    unet_discriminator_forward,
    upscale_image,
)

__all__ = [
    "EXECUTION_MODES",
    "avgpool2x",
    "bilinear_upsample2x",
    "conv2d",
    "leaky_relu",
    "nearest_upsample2x",
    "sigmoid",
    "WeightStore",
    "discriminator_schema",
    "generator_schema",
    "load_weights",
    "save_weights",
    "validate_schema",
    "DiscriminatorConfig",
    "GeneratorConfig",
    "attention_gate",
    "generator_forward",
    "rdb_forward",
    "rrdb_forward",
    "unet_discriminator_forward",
    "upscale_image",
]
