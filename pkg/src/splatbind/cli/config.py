"""Pipeline configuration: an INI schema over the stage settings."""

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from ..optimize import StageConfig

PIPELINE_KEYS = ("input", "output", "provider", "prompt", "seed")
SECTIONS = ("pipeline", "stage1", "stage2")

_STAGE_FIELDS = {f.name: f.type for f in dataclasses.fields(StageConfig)}


class ConfigError(ValueError):
    """Bad configuration or usage; commands exit with code 2."""


def _parse_value(name: str, text: str, kind):
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is tuple:
            parts = [p for p in text.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ValueError(f"need two numbers, got {text!r}")
            return (float(parts[0]), float(parts[1]))
        return text
    except ValueError as e:
        raise ConfigError(f"bad value for '{name}': {e}") from None


def parse_provider(spec: str):
    """Split a provider spec into (kind, detail).

    Accepted forms: "toy", "oracle:<path>", "remote:<host>:<port>".
    """
    if spec == "toy":
        return ("toy", None)
    if spec.startswith("oracle:"):
        path = spec[len("oracle:"):]
        if not path:
            raise ConfigError("oracle provider needs a path: oracle:<path>")
        return ("oracle", Path(path))
    if spec.startswith("remote:"):
        rest = spec[len("remote:"):]
        host, sep, port = rest.rpartition(":")
        if not sep or not host:
            raise ConfigError(
                "remote provider needs host and port: remote:<host>:<port>")
        try:
            port = int(port)
        except ValueError:
            raise ConfigError(f"remote provider port is not a number: "
                              f"{port!r}") from None
        return ("remote", (host, port))
    raise ConfigError(f"unknown provider spec {spec!r}; use toy, "
                      f"oracle:<path> or remote:<host>:<port>")


@dataclass
class PipelineConfig:
    """Everything a pipeline command needs, fully resolved."""

    input_path: Path
    output_dir: Path
    provider: str = "toy"
    stage1: StageConfig = field(default_factory=StageConfig)
    stage2: StageConfig = field(default_factory=StageConfig)

    def validate(self) -> None:
        if not Path(self.input_path).exists():
            raise ConfigError(f"input mesh not found: {self.input_path}")
        kind, detail = parse_provider(self.provider)
        if kind == "oracle" and not detail.exists():
            raise ConfigError(f"oracle file not found: {detail}")


def _stage_kwargs(cp, section, pipeline_prompt, pipeline_seed):
    kwargs = {}
    if pipeline_prompt is not None:
        kwargs["prompt"] = pipeline_prompt
    if pipeline_seed is not None:
        kwargs["seed"] = pipeline_seed
    if cp.has_section(section):
        for key, text in cp.items(section):
            if key not in _STAGE_FIELDS:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            kwargs[key] = _parse_value(f"{section}.{key}", text,
                                       _STAGE_FIELDS[key])
    return kwargs


def parse_config(path, overrides=(), seed=None, provider=None,
                 out=None) -> PipelineConfig:
    """Read an INI file, apply key=value overrides, build the config.

    `overrides` entries look like "stage1.iterations=200"; `seed`,
    `provider` and `out` are the dedicated command-line flags and win
    over the file.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, "
                              f"got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown section '{section}' in override "
                              f"{item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value)
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {path}")
    if not cp.has_section("pipeline"):
        raise ConfigError(f"{path} lacks the [pipeline] section")
    pipe = dict(cp.items("pipeline"))
    for key in pipe:
        if key not in PIPELINE_KEYS:
            raise ConfigError(f"unknown key '{key}' in [pipeline]")
    if "input" not in pipe:
        raise ConfigError("[pipeline] needs an input mesh path")
    if "output" not in pipe and out is None:
        raise ConfigError("[pipeline] needs an output directory")
    prompt = pipe.get("prompt")
    file_seed = (_parse_value("pipeline.seed", pipe["seed"], int)
                 if "seed" in pipe else None)
    use_seed = seed if seed is not None else file_seed
    try:
        stage1 = StageConfig(**_stage_kwargs(cp, "stage1", prompt, use_seed))
        stage2 = StageConfig(**_stage_kwargs(cp, "stage2", prompt, use_seed))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None
    return PipelineConfig(
        input_path=Path(pipe["input"]),
        output_dir=Path(out) if out is not None else Path(pipe["output"]),
        provider=provider if provider is not None else
        pipe.get("provider", "toy"),
        stage1=stage1, stage2=stage2)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return f"{value[0]}, {value[1]}"
    return str(value)


def dump_config(cfg: PipelineConfig) -> str:
    """Render the fully resolved configuration as INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["pipeline"] = {"input": str(cfg.input_path),
                      "output": str(cfg.output_dir),
                      "provider": cfg.provider}
    for section, stage in (("stage1", cfg.stage1), ("stage2", cfg.stage2)):
        cp[section] = {name: _format_value(getattr(stage, name))
                       for name in _STAGE_FIELDS}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
