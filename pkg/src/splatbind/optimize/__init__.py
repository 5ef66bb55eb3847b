from .adam import (AdamState, adam_step, compact_state, init_adam,
                   project_box, project_scale_cap, project_unit_rows)
from .cameras import sample_camera
from .checkpoint import load_checkpoint, save_checkpoint
from .config import StageConfig
from .metrics import psnr, windowed_means
from .regularize import laplacian_energy, umbrella_matrix
from .stages import (CameraOracle, Stage1Result, Stage2Result, run_stage1,
                     run_stage2)
from .surfels import init_surfels, normals_to_quats, vertex_normals

__all__ = [
    "StageConfig", "AdamState", "init_adam", "adam_step", "compact_state",
    "project_box", "project_scale_cap", "project_unit_rows",
    "sample_camera", "init_surfels", "vertex_normals", "normals_to_quats",
    "psnr", "windowed_means", "save_checkpoint", "load_checkpoint",
    "umbrella_matrix", "laplacian_energy",
    "CameraOracle", "Stage1Result", "Stage2Result",
    "run_stage1", "run_stage2",
]
