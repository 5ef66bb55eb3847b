"""Stage drivers: surfel shaping (stage 1) and bound enhancement (stage 2)."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..bind import (bake_free_cloud, build_bound_asset, learnable_views,
                    refresh_frames, scale_limits)
from ..core import (BoundAsset, CameraPose, ColoredMesh, GaussianCloud3D,
                    SurfelCloud2D, sigmoid)
from ..extract import extract_mesh
from ..guidance import (PhotometricOracle, downsample_area, ism_update,
                        sds_update, upsample_transpose)
from ..rasterizer import render, render_backward
from .adam import (AdamState, adam_step, compact_state, init_adam,
                   project_box, project_scale_cap, project_unit_rows)
from .cameras import sample_camera
from .checkpoint import load_checkpoint, save_checkpoint
from .config import StageConfig
from .regularize import laplacian_energy, umbrella_matrix
from .surfels import init_surfels

EXPLODE_LIMIT = 1e3


class ProviderFailure(RuntimeError):
    """Raised when the guidance path fails mid-run."""


@dataclass
class CameraOracle:
    """Photometric references paired with the poses that produced them.

    Drives the self-reconstruction fixtures: stage drivers render from
    these poses and pull toward the stored images instead of sampling
    random cameras.
    """

    _oracle: PhotometricOracle = field(default_factory=PhotometricOracle)
    _poses: dict = field(default_factory=dict)

    def add(self, key, camera: CameraPose, reference: np.ndarray) -> None:
        self._poses[key] = camera
        self._oracle.add(key, reference)

    def keys(self) -> list:
        return sorted(self._poses)

    def camera(self, key) -> CameraPose:
        return self._poses[key]

    def reference(self, key) -> np.ndarray:
        return self._oracle.references[key]

    def update(self, image, key):
        return self._oracle.update(image, key)

    def __len__(self) -> int:
        return len(self._poses)


@dataclass
class Stage1Result:
    surfels: SurfelCloud2D
    mesh: ColoredMesh
    history: list


@dataclass
class Stage2Result:
    asset: Optional[BoundAsset]
    cloud: Optional[GaussianCloud3D]
    history: list

    @property
    def scene(self):
        return self.asset if self.asset is not None else self.cloud


def _resolve_schedule(config, provider, schedule):
    if config.guidance_mode == "photometric":
        if not (hasattr(provider, "keys") and hasattr(provider, "camera")):
            raise ValueError(
                "photometric mode needs a camera oracle with poses")
        return None
    if schedule is not None:
        return schedule
    found = getattr(provider, "schedule", None)
    if found is None:
        found = getattr(provider, "remote_schedule", None)
    if found is None:
        raise ValueError("score guidance needs a noise schedule; pass one "
                         "or use a provider that carries it")
    return found


def _draw_views(config, provider, rng):
    if config.guidance_mode == "photometric":
        keys = provider.keys()
        if not keys:
            raise ValueError("photometric provider has no reference views")
        picks = rng.choice(len(keys), size=config.batch_size,
                           replace=len(keys) < config.batch_size)
        return [(provider.camera(keys[j]), keys[j]) for j in picks]
    return [(sample_camera(config, rng), None)
            for _ in range(config.batch_size)]


def _view_update(config, schedule, provider, image, key, rng, progress):
    try:
        if config.guidance_mode == "photometric":
            return provider.update(image, key)
        t = config.sample_t(schedule.total_steps, rng, progress)
        noise = rng.standard_normal(image.shape)
        if config.guidance_mode == "sds":
            return sds_update(schedule, provider, image, config.prompt, t,
                              noise, cfg_scale=config.cfg_scale)
        # clamp the inversion stride so the lower level never goes negative
        delta = min(schedule.total_steps // 10, t)
        return ism_update(schedule, provider, image, config.prompt, t,
                          delta=delta, noise=noise, cfg_scale=config.cfg_scale)
    except Exception as e:
        raise ProviderFailure(str(e)) from e


def _guided_gradients(scene, views, config, schedule, provider, rng,
                      progress):
    """Render each view, run guidance, and mean-reduce parameter gradients."""
    factor = config.downsample_factor
    total = None
    loss = 0.0
    update_abs = 0.0
    for camera, key in views:
        out = render(scene, camera)
        image = downsample_area(out.color, factor)
        u = _view_update(config, schedule, provider, image, key, rng,
                         progress)
        loss += 0.5 * float(np.mean(u.gradient ** 2))
        update_abs += u.mean_abs
        grad_image = upsample_transpose(u.gradient, factor) / len(views)
        groups = render_backward(scene, camera, grad_color=grad_image).groups()
        if total is None:
            total = {k: np.array(v) for k, v in groups.items()}
        else:
            for k in total:
                total[k] += groups[k]
    return total, loss / len(views), update_abs / len(views)


def _checkpoint_payload(stage, next_iteration, config, params, state):
    arrays = {f"param/{k}": v for k, v in params.items()}
    arrays.update({f"adam_m/{k}": v for k, v in state.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in state.v.items()})
    scalars = {"stage": stage, "iteration": int(next_iteration),
               "seed": int(config.seed), "adam_step": int(state.step)}
    return arrays, scalars


def _write_checkpoint(path, stage, next_iteration, config, params, state):
    if path is None:
        return
    arrays, scalars = _checkpoint_payload(stage, next_iteration, config,
                                          params, state)
    save_checkpoint(path, arrays, scalars)


def _restore(resume_from, stage, config):
    arrays, scalars = load_checkpoint(resume_from)
    if scalars.get("stage") != stage:
        raise ValueError(f"checkpoint is for stage {scalars.get('stage')}, "
                         f"not stage {stage}")
    if scalars.get("seed") != config.seed:
        raise ValueError(f"checkpoint seed {scalars.get('seed')} does not "
                         f"match config seed {config.seed}")
    params = {k[len("param/"):]: v for k, v in arrays.items()
              if k.startswith("param/")}
    state = AdamState(
        m={k[len("adam_m/"):]: v for k, v in arrays.items()
           if k.startswith("adam_m/")},
        v={k[len("adam_v/"):]: v for k, v in arrays.items()
           if k.startswith("adam_v/")},
        step=int(scalars["adam_step"]))
    return params, state, int(scalars["iteration"])


def run_stage1(mesh: ColoredMesh, config: StageConfig, provider,
               schedule=None, checkpoint_path=None, checkpoint_every=None,
               resume_from=None) -> Stage1Result:
    """Optimize a surfel cloud from the initial mesh and export it.

    Surfels start on the mesh vertices; every iteration renders a view
    batch, applies the configured guidance, and takes one Adam step.
    Opacity pruning runs on the configured interval.  The final cloud
    is exported through the extraction pipeline.
    """
    schedule = _resolve_schedule(config, provider, schedule)
    if resume_from is not None:
        restored, state, start = _restore(resume_from, 1, config)
        surfels = SurfelCloud2D(restored["positions"], restored["colors"],
                                restored["opacities"], restored["scales"],
                                restored["rotations"])
    else:
        surfels = init_surfels(mesh.vertices, mesh.faces, mesh.colors)
        state = None
        start = 0
    params = {"positions": surfels.positions, "colors": surfels.colors,
              "opacities": surfels.opacities, "scales": surfels.log_scales,
              "rotations": surfels.rotations}
    if state is None:
        state = init_adam(params)
    lrs = {"positions": config.lr_position, "colors": config.lr_color,
           "opacities": config.lr_opacity, "scales": config.lr_scale,
           "rotations": config.lr_rotation}
    # loose cap: no surfel grows past the object's own diagonal
    diagonal = float(np.linalg.norm(np.ptp(mesh.vertices, axis=0)))
    projections = {"rotations": project_unit_rows,
                   "opacities": project_box(-10.0, 10.0),
                   "colors": project_box(0.0, 1.0),
                   "scales": project_scale_cap(np.log(max(diagonal, 1e-6)))}
    history = []
    for i in range(start, config.iterations):
        rng = np.random.default_rng((config.seed, 1, i))
        progress = i / config.iterations
        views = _draw_views(config, provider, rng)
        try:
            grads, loss, upd = _guided_gradients(
                surfels, views, config, schedule, provider, rng, progress)
        except ProviderFailure as e:
            _write_checkpoint(checkpoint_path, 1, i, config, params, state)
            raise RuntimeError(
                f"provider failed at iteration {i}: {e}") from e
        if upd > EXPLODE_LIMIT:
            _write_checkpoint(checkpoint_path, 1, i, config, params, state)
            raise RuntimeError(
                f"guidance update exploded at iteration {i}: "
                f"mean |update| {upd:.3g} > {EXPLODE_LIMIT:g}")
        adam_step(state, params, {k: grads[k] for k in params}, lrs,
                  projections)
        history.append({"iteration": i, "loss": loss, "update_mean": upd})
        if (i + 1) % config.prune_interval == 0:
            keep = sigmoid(surfels.opacities) >= config.prune_threshold
            if not np.any(keep):
                raise RuntimeError(f"all surfels pruned at iteration {i}")
            if not np.all(keep):
                surfels = SurfelCloud2D(
                    surfels.positions[keep], surfels.colors[keep],
                    surfels.opacities[keep], surfels.log_scales[keep],
                    surfels.rotations[keep])
                params = {"positions": surfels.positions,
                          "colors": surfels.colors,
                          "opacities": surfels.opacities,
                          "scales": surfels.log_scales,
                          "rotations": surfels.rotations}
                compact_state(state, keep)
        if checkpoint_every and (i + 1) % checkpoint_every == 0:
            _write_checkpoint(checkpoint_path, 1, i + 1, config, params,
                              state)
    exported = extract_mesh(surfels, resolution=config.grid_resolution)
    return Stage1Result(surfels=surfels, mesh=exported, history=history)


def _cloud_params(cloud: GaussianCloud3D) -> dict:
    return {"positions": cloud.positions, "colors": cloud.colors,
            "opacities": cloud.opacities, "scales": cloud.log_scales,
            "rotations": cloud.rotations}


def run_stage2(mesh: ColoredMesh, config: StageConfig, provider,
               schedule=None, checkpoint_path=None, checkpoint_every=None,
               resume_from=None) -> Stage2Result:
    """Enhance a mesh with bound Gaussians (or run an unbound ablation).

    binding_mode selects the parameterization: "bound" optimizes the
    mesh-attached groups with the Laplacian vertex regularizer, while
    "frozen" and "free" bake the initialization to an unbound cloud
    (with position rate zero or the vertex rate respectively).
    """
    schedule = _resolve_schedule(config, provider, schedule)
    bound = config.binding_mode == "bound"
    # build from a copy so optimizing never mutates the caller's mesh
    asset = build_bound_asset(mesh.copy(), n_per_face=config.n_per_face)
    if bound:
        scene = asset
        params = learnable_views(asset)
        lap = umbrella_matrix(asset.mesh.faces, asset.mesh.n_vertices)
        lrs = {"vertices": config.lr_vertex, "colors": config.lr_color,
               "opacities": config.lr_opacity, "scales": config.lr_scale,
               "rotations": config.lr_rotation}
    else:
        scene = bake_free_cloud(asset)
        params = _cloud_params(scene)
        position_lr = 0.0 if config.binding_mode == "frozen" \
            else config.lr_vertex
        lrs = {"positions": position_lr, "colors": config.lr_color,
               "opacities": config.lr_opacity, "scales": config.lr_scale,
               "rotations": config.lr_rotation}
        # an unbound cloud has no host triangles to clamp against; the cap
        # here is numerical sanity only, far beyond any scene scale
        free_cap = np.log(1e3)
    stage_id = 2
    start = 0
    state = init_adam(params)
    if resume_from is not None:
        restored, state, start = _restore(resume_from, stage_id, config)
        for name, view in params.items():
            if name not in restored:
                raise ValueError(f"checkpoint lacks group '{name}'")
            np.copyto(view, restored[name])
    history = []
    for i in range(start, config.iterations):
        rng = np.random.default_rng((config.seed, stage_id, i))
        progress = i / config.iterations
        if bound:
            refresh_frames(asset)
        views = _draw_views(config, provider, rng)
        try:
            grads, loss, upd = _guided_gradients(
                scene, views, config, schedule, provider, rng, progress)
        except ProviderFailure as e:
            _write_checkpoint(checkpoint_path, stage_id, i, config, params,
                              state)
            raise RuntimeError(
                f"provider failed at iteration {i}: {e}") from e
        if upd > EXPLODE_LIMIT:
            _write_checkpoint(checkpoint_path, stage_id, i, config, params,
                              state)
            raise RuntimeError(
                f"guidance update exploded at iteration {i}: "
                f"mean |update| {upd:.3g} > {EXPLODE_LIMIT:g}")
        picked = {k: grads[k] for k in params}
        if bound and config.laplacian_weight > 0.0:
            energy, reg_grad = laplacian_energy(lap, asset.mesh.vertices)
            picked["vertices"] = picked["vertices"] \
                + config.laplacian_weight * reg_grad
            loss += config.laplacian_weight * energy
        projections = {"rotations": project_unit_rows,
                       "opacities": project_box(-10.0, 10.0),
                       "colors": project_box(0.0, 1.0),
                       "scales": project_scale_cap(
                           scale_limits(asset) if bound else free_cap)}
        adam_step(state, params, picked, lrs, projections)
        history.append({"iteration": i, "loss": loss, "update_mean": upd})
        if checkpoint_every and (i + 1) % checkpoint_every == 0:
            _write_checkpoint(checkpoint_path, stage_id, i + 1, config,
                              params, state)
    if bound:
        refresh_frames(asset)
        return Stage2Result(asset=asset, cloud=None, history=history)
    return Stage2Result(asset=None, cloud=scene, history=history)
