"""Tests for file formats, configuration, and the command-line driver."""

import csv
import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image

from helpers import icosphere
from splatbind.bind import (DeformationStream, bake_free_cloud,
                            build_bound_asset)
from splatbind.cli import (ConfigError, build_provider, dump_config,
                           load_bound_asset, load_gaussian_cloud, load_mesh,
                           load_oracle, load_png, main, parse_config,
                           parse_provider, save_bound_asset,
                           save_gaussian_cloud, save_mesh, save_oracle,
                           save_png, turntable_strip, write_loss_csv)
from splatbind.core import CameraPose, ColoredMesh
from splatbind.guidance import GaussianToyProvider
from splatbind.optimize import CameraOracle
from splatbind.rasterizer import render

V32, F32 = icosphere(2, radius=1.0)


def f32_mesh(seed=0):
    """Random colored mesh whose payload is exactly f32-representable."""
    rng = np.random.default_rng(seed)
    return ColoredMesh(V32.astype(np.float32).astype(np.float64), F32,
                       rng.uniform(size=(len(V32), 3))
                       .astype(np.float32).astype(np.float64))


def small_cloud(seed=0):
    return bake_free_cloud(build_bound_asset(f32_mesh(seed), n_per_face=1))


class TestMeshPly:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        mesh = f32_mesh()
        path = tmp_path / "m.ply"
        save_mesh(path, mesh)
        loaded = load_mesh(path)
        assert_array_equal(loaded.vertices, mesh.vertices)
        assert_array_equal(loaded.colors, mesh.colors)
        assert_array_equal(loaded.faces, mesh.faces)

    def test_save_load_save_is_byte_identical(self, tmp_path):
        p1 = tmp_path / "a.ply"
        p2 = tmp_path / "b.ply"
        save_mesh(p1, f32_mesh())
        save_mesh(p2, load_mesh(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_uchar_colors_are_rescaled(self, tmp_path):
        path = tmp_path / "u8.ply"
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 3\n"
                  b"property float x\nproperty float y\nproperty float z\n"
                  b"property uchar red\nproperty uchar green\n"
                  b"property uchar blue\n"
                  b"element face 1\n"
                  b"property list uchar int vertex_indices\n"
                  b"end_header\n")
        body = b""
        for i, rgb in enumerate([(255, 0, 0), (0, 255, 0), (0, 0, 255)]):
            body += struct.pack("<3f3B", float(i), 0.0, 0.0, *rgb)
        body += struct.pack("<B3i", 3, 0, 1, 2)
        path.write_bytes(header + body)
        mesh = load_mesh(path)
        assert_allclose(mesh.colors, np.eye(3))

    def test_missing_colors_default_to_gray(self, tmp_path):
        path = tmp_path / "plain.ply"
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 3\n"
                  b"property float x\nproperty float y\nproperty float z\n"
                  b"element face 1\n"
                  b"property list uchar int vertex_indices\n"
                  b"end_header\n")
        body = struct.pack("<9f", 0, 0, 0, 1, 0, 0, 0, 1, 0)
        body += struct.pack("<B3i", 3, 0, 1, 2)
        path.write_bytes(header + body)
        assert_array_equal(load_mesh(path).colors, np.full((3, 3), 0.5))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_bytes(b"OFF\n3 1 0\n")
        with pytest.raises(ValueError, match="not a PLY file"):
            load_mesh(path)

    def test_truncated_payload_names_byte_counts(self, tmp_path):
        path = tmp_path / "trunc.ply"
        save_mesh(path, f32_mesh())
        data = path.read_bytes()
        path.write_bytes(data[:-40])
        with pytest.raises(ValueError, match="wants .* bytes"):
            load_mesh(path)

    def test_unknown_property_type_names_byte_offset(self, tmp_path):
        path = tmp_path / "odd.ply"
        path.write_bytes(b"ply\nformat binary_little_endian 1.0\n"
                         b"element vertex 1\n"
                         b"property quaternion x\n"
                         b"end_header\n")
        with pytest.raises(ValueError, match="byte"):
            load_mesh(path)

    def test_non_triangle_faces_rejected(self, tmp_path):
        path = tmp_path / "quad.ply"
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 4\n"
                  b"property float x\nproperty float y\nproperty float z\n"
                  b"element face 1\n"
                  b"property list uchar int vertex_indices\n"
                  b"end_header\n")
        body = struct.pack("<12f", *np.eye(4, 3).ravel())
        body += struct.pack("<B4i", 4, 0, 1, 2, 3)
        path.write_bytes(header + body)
        with pytest.raises(ValueError, match="triangle"):
            load_mesh(path)

    def test_mixed_arity_rejected(self, tmp_path):
        path = tmp_path / "mixed.ply"
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 4\n"
                  b"property float x\nproperty float y\nproperty float z\n"
                  b"element face 2\n"
                  b"property list uchar int vertex_indices\n"
                  b"end_header\n")
        body = struct.pack("<12f", *np.eye(4, 3).ravel())
        body += struct.pack("<B3i", 3, 0, 1, 2)
        body += struct.pack("<B4i", 4, 0, 1, 2, 3)
        path.write_bytes(header + body)
        with pytest.raises(ValueError, match="arit"):
            load_mesh(path)


class TestCloudPly:
    def test_roundtrip_reconstructs_the_cloud(self, tmp_path):
        cloud = small_cloud()
        path = tmp_path / "c.ply"
        save_gaussian_cloud(path, cloud)
        loaded, extras = load_gaussian_cloud(path)
        assert extras == {}
        assert_allclose(loaded.positions, cloud.positions, atol=1e-6)
        assert_allclose(loaded.colors, cloud.colors, atol=1e-7)
        assert_allclose(loaded.opacities, cloud.opacities, atol=1e-6)
        assert_allclose(loaded.log_scales, cloud.log_scales, atol=1e-6)
        assert_allclose(loaded.rotations, cloud.rotations, atol=1e-7)

    def test_save_load_save_is_byte_identical(self, tmp_path):
        p1 = tmp_path / "a.ply"
        p2 = tmp_path / "b.ply"
        rng = np.random.default_rng(1)
        extras = {"segment_id": rng.integers(0, 9, len(small_cloud().positions))
                  .astype("<f4")}
        save_gaussian_cloud(p1, small_cloud(), extras)
        loaded, got_extras = load_gaussian_cloud(p1)
        save_gaussian_cloud(p2, loaded, got_extras)
        assert p1.read_bytes() == p2.read_bytes()

    def test_unknown_extras_preserved_opaquely(self, tmp_path):
        cloud = small_cloud()
        n = len(cloud.positions)
        rng = np.random.default_rng(2)
        extras = {"f_rest_0": rng.standard_normal(n).astype("<f4"),
                  "label": rng.integers(0, 200, n).astype("u1")}
        path = tmp_path / "extra.ply"
        save_gaussian_cloud(path, cloud, extras)
        _, got = load_gaussian_cloud(path)
        assert set(got) == {"f_rest_0", "label"}
        assert got["f_rest_0"].dtype == np.float32
        assert got["label"].dtype == np.uint8
        assert_array_equal(got["f_rest_0"], extras["f_rest_0"])
        assert_array_equal(got["label"], extras["label"])

    def test_missing_layout_property_named(self, tmp_path):
        path = tmp_path / "notacloud.ply"
        save_mesh(path, f32_mesh())
        with pytest.raises(ValueError, match="opacity|f_dc_0|nx"):
            load_gaussian_cloud(path)

    def test_extra_with_wrong_shape_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="shape"):
            save_gaussian_cloud(tmp_path / "x.ply", small_cloud(),
                                {"bad": np.zeros(3)})


class TestBoundAssetIo:
    def test_roundtrip_preserves_structure_and_render(self, tmp_path):
        asset = build_bound_asset(f32_mesh(), n_per_face=3)
        stem = save_bound_asset(tmp_path / "asset.gdba", asset)
        assert stem.with_name("asset.mesh.ply").exists()
        assert stem.with_name("asset.gdba").exists()
        assert stem.with_name("asset.baked.ply").exists()
        loaded = load_bound_asset(tmp_path / "asset.gdba")
        assert loaded.n_per_face == 3
        assert_array_equal(loaded.weights, asset.weights)
        assert_array_equal(loaded.colors.astype("<f4"),
                           asset.colors.astype("<f4"))
        cam = CameraPose.orbit(azimuth_deg=40, elevation_deg=70, radius=4.0,
                               width=48, height=48)
        assert np.abs(render(loaded, cam).color
                      - render(asset, cam).color).max() < 1e-3

    def test_loads_from_any_triple_member(self, tmp_path):
        asset = build_bound_asset(f32_mesh(), n_per_face=1)
        save_bound_asset(tmp_path / "a.gdba", asset)
        for name in ("a.gdba", "a.mesh.ply", "a.baked.ply", "a"):
            loaded = load_bound_asset(tmp_path / name)
            assert_array_equal(loaded.weights, asset.weights)

    def test_bad_magic(self, tmp_path):
        save_bound_asset(tmp_path / "a.gdba",
                         build_bound_asset(f32_mesh(), n_per_face=1))
        container = tmp_path / "a.gdba"
        data = container.read_bytes()
        container.write_bytes(b"NOPE" + data[4:])
        with pytest.raises(ValueError, match="magic"):
            load_bound_asset(container)

    def test_truncated_array_names_byte_counts(self, tmp_path):
        save_bound_asset(tmp_path / "a.gdba",
                         build_bound_asset(f32_mesh(), n_per_face=1))
        container = tmp_path / "a.gdba"
        container.write_bytes(container.read_bytes()[:-64])
        with pytest.raises(ValueError, match="wants .* bytes"):
            load_bound_asset(container)


class TestPng:
    def test_roundtrip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(0)
        image = rng.uniform(size=(17, 23, 3))
        path = tmp_path / "img.png"
        save_png(path, image)
        back = load_png(path)
        assert back.shape == image.shape
        assert np.abs(back - image).max() <= 0.5 / 255 + 1e-12

    def test_values_clipped(self, tmp_path):
        path = tmp_path / "clip.png"
        save_png(path, np.array([[[2.0, -1.0, 0.5]]]))
        back = load_png(path)
        assert back[0, 0, 0] == 1.0
        assert back[0, 0, 1] == 0.0


def write_ini(path, text):
    path.write_text(text)
    return path


MINIMAL_INI = """
[pipeline]
input = sphere.ply
output = out
"""


class TestConfig:
    def test_minimal_config_uses_defaults(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI)
        cfg = parse_config(ini)
        assert cfg.provider == "toy"
        assert cfg.stage1.iterations == 5000
        assert cfg.stage2.binding_mode == "bound"

    def test_typed_keys_are_parsed(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI + """
[stage1]
iterations = 123
radius_range = 2.0, 3.0
anneal_t = true
guidance_mode = ism
""")
        cfg = parse_config(ini)
        assert cfg.stage1.iterations == 123
        assert cfg.stage1.radius_range == (2.0, 3.0)
        assert cfg.stage1.anneal_t is True
        assert cfg.stage1.guidance_mode == "ism"
        assert cfg.stage2.iterations == 5000

    def test_pipeline_prompt_and_seed_propagate(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI + """
prompt = a ripe tomato
seed = 9

[stage2]
seed = 11
""")
        cfg = parse_config(ini)
        assert cfg.stage1.prompt == "a ripe tomato"
        assert cfg.stage2.prompt == "a ripe tomato"
        assert cfg.stage1.seed == 9
        assert cfg.stage2.seed == 11

    def test_flags_win_over_file(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI + "seed = 9\n")
        cfg = parse_config(ini, seed=4, provider="oracle:refs.npz",
                           out="elsewhere")
        assert cfg.stage1.seed == 4
        assert cfg.provider == "oracle:refs.npz"
        assert str(cfg.output_dir) == "elsewhere"

    def test_set_overrides_apply(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI)
        cfg = parse_config(ini, overrides=["stage1.iterations=77",
                                           "pipeline.provider=toy"])
        assert cfg.stage1.iterations == 77

    @pytest.mark.parametrize("text,match", [
        ("", "pipeline"),
        ("[pipeline]\noutput = o\n", "input"),
        ("[pipeline]\ninput = m.ply\n", "output"),
        (MINIMAL_INI + "[stage3]\nx = 1\n", "stage3"),
        (MINIMAL_INI + "[stage1]\nwarp = 9\n", "warp"),
        (MINIMAL_INI + "[stage1]\niterations = soon\n", "iterations"),
        (MINIMAL_INI + "[stage1]\nradius_range = 1\n", "radius_range"),
        (MINIMAL_INI + "[stage1]\nanneal_t = maybe\n", "anneal_t"),
        (MINIMAL_INI + "[stage1]\nbatch_size = 0\n", "batch_size"),
        (MINIMAL_INI + "typo = 1\n", "typo"),
    ])
    def test_bad_configs_rejected(self, tmp_path, text, match):
        ini = write_ini(tmp_path / "p.ini", text)
        with pytest.raises(ConfigError, match=match):
            parse_config(ini)

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.ini")

    def test_malformed_override(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI)
        with pytest.raises(ConfigError, match="override"):
            parse_config(ini, overrides=["iterations=5"])

    def test_validate_names_missing_input(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = parse_config(write_ini(tmp_path / "p.ini", MINIMAL_INI))
        with pytest.raises(ConfigError, match="sphere.ply"):
            cfg.validate()

    def test_provider_specs(self):
        assert parse_provider("toy") == ("toy", None)
        kind, path = parse_provider("oracle:refs/cameras.npz")
        assert kind == "oracle" and path.name == "cameras.npz"
        assert parse_provider("remote:localhost:7007") == \
            ("remote", ("localhost", 7007))
        for bad in ("magic", "oracle:", "remote:justhost", "remote:h:xx"):
            with pytest.raises(ConfigError):
                parse_provider(bad)

    def test_dump_parses_back_identically(self, tmp_path):
        ini = write_ini(tmp_path / "p.ini", MINIMAL_INI + """
prompt = two words
[stage1]
iterations = 42
t_range = 0.1, 0.3
""")
        cfg = parse_config(ini)
        redumped = write_ini(tmp_path / "resolved.ini", dump_config(cfg))
        cfg2 = parse_config(redumped)
        assert cfg2.stage1 == cfg.stage1
        assert cfg2.stage2 == cfg.stage2
        assert cfg2.provider == cfg.provider


class TestArtifacts:
    def test_turntable_strip_shape(self):
        strip = turntable_strip(small_cloud(), radius=4.0, frame_size=32,
                                n_frames=4)
        assert strip.shape == (32, 128, 3)
        assert strip.max() > 0.0

    def test_loss_csv_roundtrip(self, tmp_path):
        history = [{"iteration": 0, "loss": 0.125, "update_mean": 1e-3},
                   {"iteration": 1, "loss": 0.0621713, "update_mean": 2e-3}]
        path = tmp_path / "loss.csv"
        write_loss_csv(path, history, lr=1.6e-5)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "loss", "mean|update|", "lr"]
        assert len(rows) == 3
        assert float(rows[2][1]) == 0.0621713
        assert float(rows[1][3]) == 1.6e-5

    def test_oracle_roundtrip(self, tmp_path):
        oracle = CameraOracle()
        rng = np.random.default_rng(0)
        for k in range(3):
            cam = CameraPose.orbit(azimuth_deg=120.0 * k, elevation_deg=80,
                                   radius=4.0, width=32, height=24,
                                   fov_deg=55.0)
            oracle.add(f"v{k}", cam, rng.uniform(size=(24, 32, 3)))
        path = tmp_path / "refs.npz"
        save_oracle(path, oracle)
        loaded = load_oracle(path)
        assert loaded.keys() == oracle.keys()
        for key in oracle.keys():
            assert_array_equal(loaded.reference(key), oracle.reference(key))
            assert_array_equal(loaded.camera(key).rotation,
                               oracle.camera(key).rotation)
            assert_array_equal(loaded.camera(key).position,
                               oracle.camera(key).position)
            assert loaded.camera(key).width == 32
            assert loaded.camera(key).height == 24
            assert loaded.camera(key).fov_deg == 55.0

    def test_build_provider_toy_matches_resolution(self):
        from splatbind.optimize import StageConfig
        cfg = StageConfig(render_resolution=128, guidance_resolution=64)
        provider = build_provider("toy", cfg)
        assert isinstance(provider, GaussianToyProvider)
        assert provider.mean_cond.shape == (64, 64, 3)
        assert provider.schedule.total_steps == 1000


@pytest.fixture()
def workspace(tmp_path, monkeypatch):
    """Sphere mesh, photometric references, and a small INI, cwd-local."""
    monkeypatch.chdir(tmp_path)
    mesh = ColoredMesh(V32, F32, np.full((len(V32), 3), 0.5))
    save_mesh("sphere.ply", mesh)
    target = build_bound_asset(
        ColoredMesh(V32, F32, np.tile([[0.8, 0.3, 0.2]], (len(V32), 1))),
        n_per_face=1)
    oracle = CameraOracle()
    black = CameraOracle()
    for k, az in enumerate(range(0, 360, 60)):
        cam = CameraPose.orbit(azimuth_deg=az, elevation_deg=75, radius=4.0,
                               width=64, height=64)
        oracle.add(f"v{k}", cam, render(target, cam).color)
        black.add(f"v{k}", cam, np.zeros((64, 64, 3)))
    save_oracle("refs.npz", oracle)
    save_oracle("black.npz", black)
    (tmp_path / "pipe.ini").write_text("""
[pipeline]
input = sphere.ply
output = out
provider = oracle:refs.npz
seed = 3

[stage1]
iterations = 6
batch_size = 2
render_resolution = 64
guidance_resolution = 64
guidance_mode = photometric
grid_resolution = 32

[stage2]
iterations = 5
batch_size = 2
render_resolution = 64
guidance_resolution = 64
guidance_mode = photometric
n_per_face = 1
""")
    return tmp_path


class TestCommands:
    def test_validate_config_ok(self, workspace, capsys):
        assert main(["validate-config", "pipe.ini"]) == 0
        assert "ok" in capsys.readouterr().out

    def test_print_config_parses_back(self, workspace, capsys):
        assert main(["validate-config", "pipe.ini", "--print-config"]) == 0
        text = capsys.readouterr().out
        (workspace / "echo.ini").write_text(text)
        cfg = parse_config(workspace / "echo.ini")
        assert cfg.stage1.iterations == 6

    def test_stage1_writes_artifacts(self, workspace):
        assert main(["stage1", "pipe.ini"]) == 0
        out = workspace / "out"
        assert (out / "stage1.mesh.ply").exists()
        assert (out / "stage1.loss.csv").exists()
        assert (out / "stage1.turntable.png").exists()
        assert (out / "resolved.ini").exists()
        with Image.open(out / "stage1.turntable.png") as img:
            assert img.size == (24 * 64, 64)
        mesh = load_mesh(out / "stage1.mesh.ply")
        assert mesh.n_vertices > 100
        with open(out / "stage1.loss.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "loss", "mean|update|", "lr"]
        assert len(rows) == 7

    def test_stage2_accepts_external_mesh(self, workspace):
        # no stage 1 output involved, the input mesh feeds stage 2 directly
        assert main(["stage2", "pipe.ini"]) == 0
        out = workspace / "out"
        assert (out / "stage2.gdba").exists()
        assert (out / "stage2.mesh.ply").exists()
        assert (out / "stage2.baked.ply").exists()
        assert (out / "stage2.turntable.png").exists()
        asset = load_bound_asset(out / "stage2.gdba")
        assert asset.n_per_face == 1

    def test_full_writes_all_artifact_kinds(self, workspace):
        assert main(["full", "pipe.ini"]) == 0
        out = workspace / "out"
        for name in ("stage1.mesh.ply", "stage2.gdba", "stage1.loss.csv",
                     "stage2.loss.csv", "stage1.turntable.png",
                     "stage2.turntable.png", "resolved.ini"):
            assert (out / name).exists(), name

    def test_stage1_is_deterministic_per_seed(self, workspace):
        assert main(["stage1", "pipe.ini", "--out", "run_a"]) == 0
        assert main(["stage1", "pipe.ini", "--out", "run_b"]) == 0
        assert main(["stage1", "pipe.ini", "--out", "run_c",
                     "--seed", "4"]) == 0
        a = (workspace / "run_a" / "stage1.mesh.ply").read_bytes()
        b = (workspace / "run_b" / "stage1.mesh.ply").read_bytes()
        c = (workspace / "run_c" / "stage1.mesh.ply").read_bytes()
        assert a == b
        assert a != c
        csv_a = (workspace / "run_a" / "stage1.loss.csv").read_bytes()
        csv_b = (workspace / "run_b" / "stage1.loss.csv").read_bytes()
        assert csv_a == csv_b

    def test_missing_config_exits_2(self, workspace, capsys):
        assert main(["full", "nosuch.ini"]) == 2
        assert "nosuch.ini" in capsys.readouterr().err

    def test_missing_input_exits_2_and_names_path(self, workspace, capsys):
        (workspace / "bad.ini").write_text(
            (workspace / "pipe.ini").read_text()
            .replace("sphere.ply", "gone.ply"))
        assert main(["full", "bad.ini"]) == 2
        assert "gone.ply" in capsys.readouterr().err

    def test_invalid_override_exits_2(self, workspace, capsys):
        assert main(["stage1", "pipe.ini",
                     "--set", "stage1.iterations=-2"]) == 2
        assert "iterations" in capsys.readouterr().err

    def test_runtime_failure_exits_1(self, workspace, capsys):
        code = main(["stage1", "pipe.ini", "--provider", "oracle:black.npz",
                     "--set", "stage1.prune_threshold=0.9",
                     "--set", "stage1.prune_interval=2"])
        assert code == 1
        assert "pruned" in capsys.readouterr().err

    def test_render_each_artifact_kind(self, workspace):
        assert main(["stage2", "pipe.ini"]) == 0
        for target in ("out/stage2.gdba", "out/stage2.baked.ply",
                       "sphere.ply"):
            out = workspace / f"view_{target.replace('/', '_')}.png"
            assert main(["render", target, "--out", str(out),
                         "--size", "48"]) == 0
            with Image.open(out) as img:
                assert img.size == (48, 48)

    def test_render_missing_input_exits_2(self, workspace, capsys):
        assert main(["render", "nowhere.ply"]) == 2
        assert "nowhere.ply" in capsys.readouterr().err

    def test_export_writes_a_viewer_cloud(self, workspace):
        assert main(["stage2", "pipe.ini"]) == 0
        assert main(["export", "out/stage2.gdba",
                     "--out", "baked.ply"]) == 0
        cloud, _ = load_gaussian_cloud(workspace / "baked.ply")
        assert len(cloud.positions) == len(F32)

    def test_animate_strip(self, workspace):
        assert main(["stage2", "pipe.ini"]) == 0
        asset = load_bound_asset(workspace / "out" / "stage2.gdba")
        v = asset.mesh.vertices
        frames = np.stack([v * (1.0 + 0.05 * k) for k in range(4)])
        DeformationStream(np.arange(4.0), frames).save(
            workspace / "wob.gdpd")
        assert main(["animate", "out/stage2.gdba", "--frames", "wob.gdpd",
                     "--out", "anim.png", "--size", "32"]) == 0
        with Image.open(workspace / "anim.png") as img:
            assert img.size == (4 * 32, 32)

    def test_resume_continues_a_run(self, workspace):
        assert main(["stage1", "pipe.ini", "--out", "full_run"]) == 0
        assert main(["stage1", "pipe.ini", "--out", "half_run",
                     "--checkpoint-every", "3",
                     "--set", "stage1.iterations=3"]) == 0
        assert main(["stage1", "pipe.ini", "--out", "resumed",
                     "--resume", "half_run/stage1.gdck"]) == 0
        full = (workspace / "full_run" / "stage1.mesh.ply").read_bytes()
        resumed = (workspace / "resumed" / "stage1.mesh.ply").read_bytes()
        assert full == resumed
