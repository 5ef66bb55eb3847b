"""Run artifacts: turntable strips, loss logs, oracle files, snapshots."""

import csv
from pathlib import Path

import numpy as np

from ..core import CameraPose
from ..guidance import GaussianToyProvider, NoiseSchedule
from ..optimize import CameraOracle
from ..rasterizer import render
from .config import ConfigError, dump_config, parse_provider

TURNTABLE_FRAMES = 24
TURNTABLE_ELEVATION = 90.0


def turntable_strip(scene, radius: float, frame_size: int = 256,
                    n_frames: int = TURNTABLE_FRAMES,
                    elevation: float = TURNTABLE_ELEVATION,
                    fov_deg: float = 60.0) -> np.ndarray:
    """Horizontal strip of orbit renders at fixed elevation."""
    frames = []
    for k in range(n_frames):
        cam = CameraPose.orbit(azimuth_deg=360.0 * k / n_frames,
                               elevation_deg=elevation, radius=radius,
                               width=frame_size, height=frame_size,
                               fov_deg=fov_deg)
        frames.append(render(scene, cam).color)
    return np.concatenate(frames, axis=1)


def write_loss_csv(path, history, lr: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "mean|update|", "lr"])
        for row in history:
            writer.writerow([row["iteration"], repr(row["loss"]),
                             repr(row["update_mean"]), repr(lr)])


def write_snapshot(out_dir, cfg) -> None:
    Path(out_dir, "resolved.ini").write_text(dump_config(cfg))


def save_oracle(path, oracle: CameraOracle) -> None:
    """Persist reference views + poses as one npz archive."""
    payload = {}
    for key in oracle.keys():
        cam = oracle.camera(key)
        payload[f"image/{key}"] = oracle.reference(key)
        payload[f"rotation/{key}"] = cam.rotation
        payload[f"position/{key}"] = cam.position
        payload[f"meta/{key}"] = np.array(
            [cam.width, cam.height, cam.fov_deg, cam.near])
    np.savez(path, **payload)


def load_oracle(path) -> CameraOracle:
    oracle = CameraOracle()
    with np.load(path) as archive:
        keys = sorted(name[len("image/"):] for name in archive.files
                      if name.startswith("image/"))
        if not keys:
            raise ConfigError(f"{path}: oracle archive holds no image/* "
                              f"entries")
        for key in keys:
            for part in ("rotation", "position", "meta"):
                if f"{part}/{key}" not in archive.files:
                    raise ConfigError(f"{path}: oracle entry '{key}' lacks "
                                      f"{part}/{key}")
            meta = archive[f"meta/{key}"]
            cam = CameraPose(position=archive[f"position/{key}"],
                             rotation=archive[f"rotation/{key}"],
                             width=int(meta[0]), height=int(meta[1]),
                             fov_deg=float(meta[2]), near=float(meta[3]))
            oracle.add(key, cam, archive[f"image/{key}"])
    return oracle


def build_provider(spec: str, stage_config):
    """Instantiate the provider a stage will train against."""
    kind, detail = parse_provider(spec)
    if kind == "oracle":
        return load_oracle(detail)
    if kind == "toy":
        res = stage_config.guidance_resolution
        schedule = NoiseSchedule.linear()
        return GaussianToyProvider(schedule,
                                   np.full((res, res, 3), 0.5))
    host, port = detail
    from ..guidance import RemoteScoreProvider
    return RemoteScoreProvider(host, port).connect()
