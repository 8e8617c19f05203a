import numpy as np
import pytest
import torch

from weightconv import convert, read_srwt1
from weightconv.container import ContainerError, read_vector, write_srwt1
from weightconv.convert import check_vector_matches, emit_test_vector
from weightconv.maps import (
    ConversionError,
    MappingError,
    materialize_spectral_norm,
    unwrap_state_dict,
)

from checkpoints import seeded_checkpoint


class TestConvertGenerator:
    def test_config_inferred_from_shapes(self, tmp_path, tiny_gen_ckpt):
        out = tmp_path / "gen.srwt"
        config = convert(tiny_gen_ckpt, "rrdb_gen", out)
        assert config["num_feat"] == 8
        assert config["num_blocks"] == 2
        assert config["growth"] == 4
        manifest, tensors = read_srwt1(out)
        assert manifest["arch_tag"] == "rrdb_gen"
        assert manifest["config"]["num_blocks"] == 2

    def test_default_depth_inference(self, tmp_path):
        # the published generator shape: 23 blocks, 64 features
        ckpt = seeded_checkpoint(
            "rrdb_gen", 3, tmp_path / "big.pth", num_feat=64, num_blocks=23, growth=32
        )
        config = convert(ckpt, "rrdb_gen", tmp_path / "big.srwt")
        assert config["num_blocks"] == 23
        assert config["num_feat"] == 64

    def test_tensor_count_and_shapes_survive(self, tmp_path, tiny_gen_ckpt):
        out = tmp_path / "gen.srwt"
        convert(tiny_gen_ckpt, "rrdb_gen", out)
        sd = unwrap_state_dict(torch.load(tiny_gen_ckpt, map_location="cpu", weights_only=True))
        _, tensors = read_srwt1(out)
        assert len(tensors) == len(sd)
        for name, t in sd.items():
            assert tuple(tensors[name].shape) == tuple(t.shape)
            assert np.array_equal(tensors[name], t.numpy())

    def test_idempotent_bytes(self, tmp_path, tiny_gen_ckpt):
        a, b = tmp_path / "a.srwt", tmp_path / "b.srwt"
        convert(tiny_gen_ckpt, "rrdb_gen", a)
        convert(tiny_gen_ckpt, "rrdb_gen", b)
        assert a.read_bytes() == b.read_bytes()

    def test_blob_lengths(self, tmp_path, tiny_gen_ckpt):
        out = tmp_path / "gen.srwt"
        convert(tiny_gen_ckpt, "rrdb_gen", out)
        manifest, tensors = read_srwt1(out)
        for entry in manifest["tensors"]:
            assert entry["len"] == 4 * int(np.prod(entry["dims"]))

    def test_wrong_arch_rejected_with_diff(self, tmp_path, tiny_disc_ckpt):
        with pytest.raises(MappingError) as exc:
            convert(tiny_disc_ckpt, "rrdb_gen", tmp_path / "x.srwt")
        assert exc.value.missing or exc.value.unknown

    def test_unwrapped_plain_state_dict(self, tmp_path):
        ckpt = seeded_checkpoint("rrdb_gen", 5, tmp_path / "plain.pth", wrap="")
        config = convert(ckpt, "rrdb_gen", tmp_path / "plain.srwt")
        assert config["num_blocks"] == 2

    def test_garbage_file_rejected(self, tmp_path):
        bad = tmp_path / "bad.pth"
        bad.write_bytes(b"definitely not a checkpoint")
        with pytest.raises(ConversionError):
            convert(bad, "rrdb_gen", tmp_path / "bad.srwt")


class TestConvertDiscriminators:
    def test_spectral_norm_materialized(self, tmp_path, tiny_disc_ckpt):
        out = tmp_path / "disc.srwt"
        convert(tiny_disc_ckpt, "unet_disc", out)
        manifest, tensors = read_srwt1(out)
        assert manifest["arch_tag"] == "unet_disc"
        assert not any(name.endswith(("weight_orig", "weight_u", "weight_v")) for name in tensors)
        # effective weight = weight_orig / (u . W v)
        sd = unwrap_state_dict(torch.load(tiny_disc_ckpt, map_location="cpu", weights_only=True))
        orig = sd["conv1.weight_orig"].numpy().astype(np.float64)
        u = sd["conv1.weight_u"].numpy().astype(np.float64)
        v = sd["conv1.weight_v"].numpy().astype(np.float64)
        sigma = u @ (orig.reshape(orig.shape[0], -1) @ v)
        assert np.abs(tensors["down1.weight"] - (orig / sigma)).max() <= 1e-6

    def test_bias_free_convs_get_zero_biases(self, tmp_path, tiny_disc_ckpt):
        convert(tiny_disc_ckpt, "unet_disc", tmp_path / "d.srwt")
        _, tensors = read_srwt1(tmp_path / "d.srwt")
        for name in ("down1", "down2", "down3", "up3", "up2", "up1", "tail1", "tail2"):
            assert np.all(tensors[f"{name}.bias"] == 0.0)

    def test_attention_map(self, tmp_path, tiny_attn_ckpt):
        config = convert(tiny_attn_ckpt, "attn_unet_disc", tmp_path / "a.srwt")
        assert config["variant"] == "attention"
        _, tensors = read_srwt1(tmp_path / "a.srwt")
        assert "att1.psi.weight" in tensors
        assert "att3.theta.weight" in tensors

    def test_plain_checkpoint_not_attention(self, tmp_path, tiny_disc_ckpt):
        with pytest.raises(MappingError) as exc:
            convert(tiny_disc_ckpt, "attn_unet_disc", tmp_path / "x.srwt")
        assert any(name.startswith("att") for name in exc.value.missing)


class TestVectors:
    def test_deterministic_bytes(self, tmp_path, tiny_gen_ckpt):
        a, b = tmp_path / "a.vec", tmp_path / "b.vec"
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 7, a)
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 7, b)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self, tmp_path, tiny_gen_ckpt):
        a, b = tmp_path / "a.vec", tmp_path / "b.vec"
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 7, a)
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 8, b)
        assert a.read_bytes() != b.read_bytes()

    def test_generator_vector_shapes(self, tmp_path, tiny_gen_ckpt):
        path = tmp_path / "g.vec"
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 0, path)
        manifest, x, y = read_vector(path)
        assert tuple(x.shape) == (1, 3, 16, 16)
        assert tuple(y.shape) == (1, 3, 64, 64)
        assert manifest["output_space"] == "clamped [0,1]"
        assert 0.0 <= y.min() and y.max() <= 1.0

    def test_discriminator_vector_shapes(self, tmp_path, tiny_disc_ckpt):
        path = tmp_path / "d.vec"
        emit_test_vector(tiny_disc_ckpt, "unet_disc", 0, path)
        _, x, y = read_vector(path)
        assert tuple(x.shape) == (1, 3, 16, 16)
        assert tuple(y.shape) == (1, 1, 16, 16)
        assert 0.0 < y.min() and y.max() < 1.0

    def test_vector_arch_validation(self, tmp_path, tiny_gen_ckpt):
        path = tmp_path / "g.vec"
        emit_test_vector(tiny_gen_ckpt, "rrdb_gen", 0, path)
        check_vector_matches(path, "rrdb_gen", {"in_ch": 3})
        with pytest.raises(ConversionError):
            check_vector_matches(path, "unet_disc", {"in_ch": 3})
        with pytest.raises(ConversionError):
            check_vector_matches(path, "rrdb_gen", {"in_ch": 1})


class TestContainer:
    def test_srwt1_round_trip(self, tmp_path):
        tensors = {
            "b.weight": np.arange(12, dtype=np.float32).reshape(3, 4),
            "a.bias": np.ones(3, dtype=np.float32),
        }
        path = tmp_path / "t.srwt"
        write_srwt1(path, "toy", {"k": 1}, tensors, note="n")
        manifest, back = read_srwt1(path)
        assert manifest["config"] == {"k": 1}
        assert [e["name"] for e in manifest["tensors"]] == ["a.bias", "b.weight"]
        for name, t in tensors.items():
            assert np.array_equal(back[name], t)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "t.srwt"
        write_srwt1(path, "toy", {}, {"a": np.zeros(1, dtype=np.float32)})
        blob = bytearray(path.read_bytes())
        blob[0] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerError):
            read_srwt1(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.srwt"
        write_srwt1(path, "toy", {}, {"a": np.zeros(2, dtype=np.float32)})
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ContainerError):
            read_srwt1(path)


class TestSpectralNormHelper:
    def test_passthrough_without_sn(self):
        sd = {"w.weight": np.ones((2, 2), dtype=np.float32)}
        out = materialize_spectral_norm(sd)
        assert np.array_equal(out["w.weight"], sd["w.weight"])

    def test_sigma_division(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        u = rng.standard_normal(4).astype(np.float32)
        v = rng.standard_normal(27).astype(np.float32)
        out = materialize_spectral_norm(
            {"c.weight_orig": w, "c.weight_u": u, "c.weight_v": v}
        )
        sigma = u.astype(np.float64) @ (w.reshape(4, -1).astype(np.float64) @ v.astype(np.float64))
        assert np.abs(out["c.weight"] - w / sigma).max() <= 1e-6
        assert set(out) == {"c.weight"}
