"""Analytic backward pass vs central finite differences, per parameter group.

Scenes follow the smooth-regime recipe from helpers: modest opacities,
footprints larger than the image, interior colors, near-facing surfels.
Differences are taken on the raw (pre-activation) arrays, the same arrays
the optimizer steps.
"""

import numpy as np
import pytest

from splatbind.rasterizer import render, render_backward

from helpers import (
    finite_difference,
    gradient_camera,
    gradient_scene_3d,
    gradient_scene_bound,
    gradient_scene_surfel,
    group_relative_error,
)

TOL = 1e-3
H = 1e-4


def loss_weights(rng, camera):
    g_color = rng.standard_normal((camera.height, camera.width, 3))
    g_alpha = rng.standard_normal((camera.height, camera.width))
    return g_color, g_alpha


def scalar_loss(scene, camera, g_color, g_alpha, background):
    out = render(scene, camera, background=background)
    return float(np.sum(out.color * g_color) + np.sum(out.alpha * g_alpha))


def check_groups(scene, camera, param_of, grad_key_of, seed=0):
    """FD-check every (attribute, gradient group) pair of one scene."""
    rng = np.random.default_rng(seed)
    g_color, g_alpha = loss_weights(rng, camera)
    bg = np.array([0.35, 0.3, 0.25])
    grads = render_backward(scene, camera, g_color, grad_alpha=g_alpha,
                            background=bg).groups()
    errs = {}
    for name, attr_path in param_of.items():
        arr = _resolve(scene, attr_path)
        fd = finite_difference(
            lambda _: scalar_loss(scene, camera, g_color, g_alpha, bg),
            arr, h=H)
        errs[name] = group_relative_error(grads[grad_key_of[name]], fd)
    return errs


def _resolve(obj, path):
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


class TestVolumetric3D:
    def test_all_groups(self):
        rng = np.random.default_rng(21)
        cam = gradient_camera()
        cloud = gradient_scene_3d(rng, n=8)
        param_of = {"positions": "positions", "colors": "colors",
                    "opacities": "opacities", "scales": "log_scales",
                    "rotations": "rotations"}
        key_of = {k: k if k in ("positions", "colors", "opacities",
                                "rotations") else "scales"
                  for k in param_of}
        errs = check_groups(cloud, cam, param_of, key_of, seed=1)
        for name, e in errs.items():
            assert e < TOL, f"3d {name}: rel err {e:.2e}"

    def test_no_alpha_grad_needed(self):
        # color-only objective exercises the grad_alpha=None path
        rng = np.random.default_rng(22)
        cam = gradient_camera()
        cloud = gradient_scene_3d(rng, n=6)
        g_color = rng.standard_normal((cam.height, cam.width, 3))
        bg = np.zeros(3)
        grads = render_backward(cloud, cam, g_color, background=bg)

        def loss(_):
            out = render(cloud, cam, background=bg)
            return float(np.sum(out.color * g_color))

        fd = finite_difference(loss, cloud.positions, h=H)
        assert group_relative_error(grads.positions, fd) < TOL


class TestSurfel:
    def test_all_groups(self):
        rng = np.random.default_rng(31)
        cam = gradient_camera()
        cloud = gradient_scene_surfel(rng, cam, n=8)
        param_of = {"positions": "positions", "colors": "colors",
                    "opacities": "opacities", "scales": "log_scales",
                    "rotations": "rotations"}
        key_of = {k: "scales" if k == "scales" else k for k in param_of}
        errs = check_groups(cloud, cam, param_of, key_of, seed=2)
        for name, e in errs.items():
            assert e < TOL, f"surfel {name}: rel err {e:.2e}"


class TestBoundAsset:
    def test_all_groups_including_vertices(self):
        rng = np.random.default_rng(41)
        cam = gradient_camera()
        asset = gradient_scene_bound(rng)
        # frames are constant state during differentiation: perturbing a
        # vertex moves the realized centers but not the cached frames
        param_of = {"vertices": "mesh.vertices", "colors": "colors",
                    "opacities": "opacities", "scales": "log_scales",
                    "rotations": "rotations_2d"}
        key_of = {"vertices": "vertices", "colors": "colors",
                  "opacities": "opacities", "scales": "scales",
                  "rotations": "rotations"}
        errs = check_groups(asset, cam, param_of, key_of, seed=3)
        for name, e in errs.items():
            assert e < TOL, f"bound {name}: rel err {e:.2e}"


class TestGradientEdgeCases:
    def test_empty_scene_returns_zeros(self):
        rng = np.random.default_rng(5)
        cam = gradient_camera()
        cloud = gradient_scene_3d(rng, n=4)
        far = type(cloud)(
            positions=cloud.positions + np.array([0.0, 0.0, 100.0]) * 0.0
            + cam.position * 3.0,  # well behind the camera
            colors=cloud.colors,
            opacities=cloud.opacities,
            log_scales=cloud.log_scales,
            rotations=cloud.rotations,
        )
        g_color = np.ones((cam.height, cam.width, 3))
        grads = render_backward(far, cam, g_color)
        assert np.all(grads.positions == 0.0)
        assert np.all(grads.colors == 0.0)

    def test_gradient_shapes_match_storage(self):
        rng = np.random.default_rng(6)
        cam = gradient_camera()
        cloud = gradient_scene_surfel(rng, cam, n=5)
        g_color = rng.standard_normal((cam.height, cam.width, 3))
        grads = render_backward(cloud, cam, g_color)
        assert grads.positions.shape == cloud.positions.shape
        assert grads.scales.shape == cloud.log_scales.shape
        assert grads.rotations.shape == cloud.rotations.shape

    def test_bound_gradient_shapes(self):
        rng = np.random.default_rng(7)
        cam = gradient_camera()
        asset = gradient_scene_bound(rng)
        g_color = rng.standard_normal((cam.height, cam.width, 3))
        grads = render_backward(asset, cam, g_color)
        assert grads.vertices.shape == asset.mesh.vertices.shape
        assert grads.rotations.shape == asset.rotations_2d.shape
        assert grads.scales.shape == asset.log_scales.shape
