from .artifacts import (build_provider, load_oracle, save_oracle,
                        turntable_strip, write_loss_csv, write_snapshot)
from .config import (ConfigError, PipelineConfig, dump_config, parse_config,
                     parse_provider)
from .io import (load_bound_asset, load_gaussian_cloud, load_mesh, load_png,
                 save_bound_asset, save_gaussian_cloud, save_mesh, save_png)
from .main import build_parser, main

__all__ = [
    "ConfigError", "PipelineConfig", "build_parser", "build_provider",
    "dump_config", "load_bound_asset", "load_gaussian_cloud", "load_mesh",
    "load_oracle", "load_png", "main", "parse_config", "parse_provider",
    "save_bound_asset", "save_gaussian_cloud", "save_mesh", "save_oracle",
    "save_png", "write_loss_csv", "write_snapshot",
]
