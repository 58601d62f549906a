"""One strict configuration document for the CLI and the bindings.

Unknown keys are rejected (naming the offending key) so typos never
silently fall back to defaults. Every section maps onto the corresponding
module's config dataclass; flag-level overrides happen in the CLI.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .augment import AugmentSpec, FocusConfig, MODES
from .errors import ConfigError
from .gaze import KernelSpec
from .saliency import SR_SMOOTH_SIGMA, SR_WORKING_PX, VALID_KINDS
from .synth import SynthSpec
from .train import TrainConfig


@dataclass(frozen=True)
class PathsConfig:
    data_root: str = None
    saliency_root: str = None
    output_dir: str = None


@dataclass(frozen=True)
class SaliencyOptions:
    kind: str = "gaze_file"
    working_px: int = SR_WORKING_PX
    smooth_sigma: float = SR_SMOOTH_SIGMA

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"kind must be one of {VALID_KINDS}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mode: str = "focus"
    workers: int = 1
    paths: PathsConfig = PathsConfig()
    augment: AugmentSpec = AugmentSpec()
    focus: FocusConfig = FocusConfig()
    kernel: KernelSpec = KernelSpec()
    synth: SynthSpec = SynthSpec()
    saliency: SaliencyOptions = SaliencyOptions()
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_SECTIONS = {
    "paths": PathsConfig,
    "augment": AugmentSpec,
    "focus": FocusConfig,
    "kernel": KernelSpec,
    "synth": SynthSpec,
    "saliency": SaliencyOptions,
    "train": TrainConfig,
}
_SCALARS = ("seed", "mode", "workers")


def _build(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config key '{where}.{unknown[0]}'")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**converted)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad '{where}' section: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS) - set(_SCALARS))
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'")
    kwargs = {}
    for key in _SCALARS:
        if key in data:
            kwargs[key] = data[key]
    for key, cls in _SECTIONS.items():
        section = data.get(key)
        if section is None:
            continue
        if not isinstance(section, dict):
            raise ConfigError(f"config section '{key}' must be an object")
        kwargs[key] = _build(cls, section, key)
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"config file not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)
