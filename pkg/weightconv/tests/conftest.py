import pytest

from checkpoints import seeded_checkpoint


@pytest.fixture
def tiny_gen_ckpt(tmp_path):
    return seeded_checkpoint("rrdb_gen", 11, tmp_path / "gen.pth")


@pytest.fixture
def tiny_disc_ckpt(tmp_path):
    return seeded_checkpoint("unet_disc", 12, tmp_path / "disc.pth")


@pytest.fixture
def tiny_attn_ckpt(tmp_path):
    return seeded_checkpoint("attn_unet_disc", 13, tmp_path / "attn.pth")
