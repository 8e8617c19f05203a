import numpy as np
import torch

from weightconv import archs


def seeded_checkpoint(arch: str, seed: int, path, wrap: str = "params_ema", **kwargs):
    """Synthesize a source-framework checkpoint with realistic layer
    names (the published files are not redistributable)."""
    torch.manual_seed(seed)
    module = archs.build_module(arch, _default_config(arch, **kwargs))
    with torch.no_grad():
        for name, p in module.named_parameters():
            if name.endswith("bias"):
                p.zero_()
            else:
                p.normal_(0.0, 0.05)
        # keep generator outputs mostly inside (0, 1) so clamping does not
        # mask the parity comparison
        if arch == "rrdb_gen":
            module.conv_last.bias.fill_(0.5)
        else:
            # run power iterations so the stored spectral-norm u/v vectors
            # are converged, as in trained checkpoints
            module.train()
            cfg = _default_config(arch, **kwargs)
            probe = torch.zeros(1, cfg["in_ch"], 16, 16)
            for _ in range(8):
                module(probe)
            module.eval()
    sd = module.state_dict()
    torch.save({wrap: sd} if wrap else sd, path)
    return path


def _default_config(arch: str, **kwargs) -> dict:
    if arch == "rrdb_gen":
        cfg = {"in_ch": 3, "out_ch": 3, "num_feat": 8, "num_blocks": 2, "growth": 4}
    else:
        cfg = {"in_ch": 3, "num_feat": 8}
    cfg.update(kwargs)
    return cfg
