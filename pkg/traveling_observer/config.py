"""
traveling_observer.config
"""
from __future__ import annotations
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union, get_type_hints

from werkzeug.datastructures import ImmutableDict

from .errors import ConfigError

MODES = ("TOM", "TOM-STL", "DR-MTL", "DR-STL")
VE_MODES = ("learned", "zero", "random", "oracle")
BATCH_POLICIES = ("min", "max")
LR_SCHEDULES = ("constant", "plateau")
PRECISIONS = ("float64", "float32")
VE_INITS = ("variance", "std")
PRESETS = ("cifar", "temperature", "gp", "hyperspheres", "tabular", "micro")

#: (section, line) for every parsed key.
Parsed = Dict[str, Dict[str, Tuple[str, int]]]


@dataclass
class TrainConfig:
    """
    Every hyperparameter of a training run.
    """
    steps_total: int = 1000
    epoch_steps: int = 100
    tasks_per_step: int = 1
    batch_size: Optional[int] = None
    batch_policy: str = "min"
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    dropout_rate: float = 0.0
    ve_dim: int = 2
    num_blocks: int = 3
    hidden_size: int = 128
    latent_size: int = 128
    mode: str = "TOM"
    ve_mode: str = "learned"
    ve_init: str = "variance"
    seed: int = 0
    lr_schedule: str = "constant"
    plateau_patience: int = 20
    max_lr_decreases: int = 5
    finetune: bool = False
    finetune_min_samples: int = 5000
    finetune_learning_rate: float = 1e-4
    finetune_patience: int = 100
    finetune_smoothing: int = 10
    finetune_max_epochs: int = 500
    precision: str = "float64"
    eval_batch_size: int = 256
    ve_snapshot_every: int = 0

    def validate(self) -> "TrainConfig":
        """
        Normalizes case-insensitive choices and checks ranges.
        """
        self.mode = self.mode.upper()
        _choice("mode", self.mode, MODES)
        _choice("ve_mode", self.ve_mode, VE_MODES)
        _choice("batch_policy", self.batch_policy, BATCH_POLICIES)
        _choice("lr_schedule", self.lr_schedule, LR_SCHEDULES)
        _choice("precision", self.precision, PRECISIONS)
        _choice("ve_init", self.ve_init, VE_INITS)
        for name in ("steps_total", "epoch_steps", "tasks_per_step", "ve_dim", "hidden_size",
                     "latent_size", "eval_batch_size", "finetune_smoothing"):
            if getattr(self, name) < 1:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", key=name)
        if self.num_blocks < 0:
            raise ConfigError("must be non-negative", key="num_blocks")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("must be positive", key="batch_size")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"must lie in [0, 1), got {self.dropout_rate}", key="dropout_rate")
        if self.weight_decay < 0:
            raise ConfigError("must be non-negative", key="weight_decay")
        return self


@dataclass
class RunConfig:
    """
    A preset plus every override, the data location and the artifact
    directory.  The resolved object is serialized verbatim into run
    metadata.
    """
    preset: str = "gp"
    data_path: Optional[str] = None
    out_dir: str = "runs/latest"
    max_inputs: int = 10
    max_outputs: int = 10
    max_features: int = 10
    max_classes: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def seed(self) -> int:
        return self.train.seed

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out: Dict[str, Dict[str, Any]] = {section: {} for section in SECTIONS}
        for key, section in KEY_SECTIONS.items():
            out[section][key] = self._get(key)
        return out

    def to_text(self) -> str:
        """
        Renders the config in the ``key = value`` file format.
        """
        lines: List[str] = []
        for section, values in self.to_dict().items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                lines.append(f"{key} = {_render(value)}")
            lines.append("")
        return "\n".join(lines)

    def _get(self, key: str) -> Any:
        if key in TRAIN_FIELDS:
            return getattr(self.train, key)
        return getattr(self, key)

    def set(
            self,
            key: str,
            raw: Any,
            path: Optional[str] = None,
            line: Optional[int] = None
    ) -> None:
        """
        Sets ``key`` from a raw (string or typed) value.
        """
        if key not in KEY_SECTIONS:
            raise ConfigError("unknown key", path, line, key)
        target: Any = self.train if key in TRAIN_FIELDS else self
        value = _coerce(key, raw, _HINTS[key], path, line)
        setattr(target, key, value)


SECTIONS = ("run", "universe", "model", "trainer")

TRAIN_FIELDS = tuple(f.name for f in dataclasses.fields(TrainConfig))

KEY_SECTIONS: Mapping[str, str] = ImmutableDict(
    {
        "preset": "run",
        "data_path": "run",
        "out_dir": "run",
        "max_inputs": "universe",
        "max_outputs": "universe",
        "max_features": "universe",
        "max_classes": "universe",
        **{
            name: "model"
            for name in ("mode", "ve_mode", "ve_init", "ve_dim", "num_blocks", "hidden_size",
                         "latent_size", "dropout_rate", "precision")
        },
        **{
            name: "trainer"
            for name in TRAIN_FIELDS
            if name not in ("mode", "ve_mode", "ve_init", "ve_dim", "num_blocks", "hidden_size",
                            "latent_size", "dropout_rate", "precision")
        },
    }
)

_HINTS: Dict[str, Any] = {
    **{k: v for k, v in get_type_hints(RunConfig).items() if k != "train"},
    **get_type_hints(TrainConfig),
}


#: Settings of every experiment preset.  Keys not listed keep the
#: :class:`TrainConfig` defaults.
PRESET_VALUES: Mapping[str, Mapping[str, Any]] = ImmutableDict(
    {
        "cifar": ImmutableDict(
            {
                "steps_total": 500_000, "epoch_steps": 1000, "batch_size": 256,
                "dropout_rate": 0.0, "weight_decay": 0.0, "ve_dim": 2, "num_blocks": 3,
            }
        ),
        "temperature": ImmutableDict(
            {
                "steps_total": 100_000, "epoch_steps": 100, "batch_size": 32,
                "dropout_rate": 0.0, "weight_decay": 0.0, "ve_dim": 2, "num_blocks": 3,
            }
        ),
        "gp": ImmutableDict(
            {
                "steps_total": 250_000, "epoch_steps": 1000, "dropout_rate": 0.5,
                "weight_decay": 1e-4, "ve_dim": 2, "num_blocks": 3,
                "max_inputs": 10, "max_outputs": 10,
            }
        ),
        "hyperspheres": ImmutableDict(
            {
                "steps_total": 250_000, "epoch_steps": 1000, "dropout_rate": 0.0,
                "weight_decay": 1e-4, "ve_dim": 2, "num_blocks": 3,
                "max_features": 10, "max_classes": 10,
            }
        ),
        "tabular": ImmutableDict(
            {
                "steps_total": 10_000_000, "epoch_steps": 10_000, "tasks_per_step": 32,
                "dropout_rate": 0.5, "weight_decay": 1e-5, "ve_dim": 128, "num_blocks": 10,
                "lr_schedule": "plateau", "finetune": True,
            }
        ),
        "micro": ImmutableDict(
            {
                "steps_total": 200, "epoch_steps": 50, "ve_dim": 2, "hidden_size": 8,
                "latent_size": 8, "num_blocks": 2, "dropout_rate": 0.0,
                "max_inputs": 2, "max_outputs": 2,
            }
        ),
    }
)


def _choice(key: str, value: str, choices: Tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(f"{value!r} is not one of {', '.join(choices)}", key=key)


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(
        key: str,
        raw: Any,
        hint: Any,
        path: Optional[str],
        line: Optional[int]
) -> Any:
    optional = getattr(hint, "__origin__", None) is Union and type(None) in hint.__args__
    if optional:
        hint = next(arg for arg in hint.__args__ if arg is not type(None))
    if not isinstance(raw, str):
        if raw is None and optional:
            return None
        raw = _render(raw)
    text = raw.strip()
    if optional and text.lower() in ("", "none", "null"):
        return None
    try:
        if hint is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if hint is int:
            return int(float(text)) if "e" in text.lower() else int(text.replace("_", ""))
        if hint is float:
            return float(text)
        return text
    except ValueError as error:
        raise ConfigError(str(error), path, line, key) from None


def parse_key_values(text: str, path: Optional[str] = None) -> Parsed:
    """
    Parses ``key = value`` lines grouped under ``[section]`` headers.
    Keys before the first header land in section ``""``.  Blank lines
    and lines starting with ``#`` or ``;`` are ignored.
    """
    parsed: Parsed = {"": {}}
    section = ""
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {line!r}", path, number)
            section = line[1:-1].strip()
            parsed.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", path, number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", path, number)
        if key in parsed[section]:
            raise ConfigError("duplicate key", path, number, key)
        parsed[section][key] = (value, number)
    return parsed


def read_key_value_file(path: str) -> Parsed:
    with open(path, encoding="utf-8") as handle:
        return parse_key_values(handle.read(), path)


def apply_preset(config: RunConfig, preset: str) -> None:
    if preset not in PRESET_VALUES:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}",
                          key="preset")
    config.preset = preset
    for key, value in PRESET_VALUES[preset].items():
        config.set(key, value)


def apply_parsed(config: RunConfig, parsed: Parsed, path: Optional[str] = None) -> None:
    """
    Applies parsed file entries, checking that each key sits in its
    documented section.
    """
    for section, entries in parsed.items():
        if section and section not in SECTIONS:
            first_line = min((line for _, line in entries.values()), default=None)
            raise ConfigError(f"unknown section [{section}]", path, first_line)
        for key, (value, line) in entries.items():
            expected = KEY_SECTIONS.get(key)
            if expected is None:
                raise ConfigError("unknown key", path, line, key)
            if section and section != expected:
                raise ConfigError(f"belongs in section [{expected}]", path, line, key)
            config.set(key, value, path, line)


def resolve_config(
        preset: Optional[str] = None,
        config_path: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Builds a :class:`RunConfig` by applying, in order, the preset, the
    config file and explicit overrides.  A preset named in the file is
    used when ``preset`` is not given.
    """
    config = RunConfig()
    parsed: Parsed = {}
    if config_path is not None:
        parsed = read_key_value_file(config_path)
        if preset is None:
            for section in ("run", ""):
                if "preset" in parsed.get(section, {}):
                    preset = parsed[section]["preset"][0]
    apply_preset(config, preset or "gp")
    if parsed:
        apply_parsed(config, parsed, config_path)
        config.preset = preset or config.preset
    for key, value in (overrides or {}).items():
        if value is not None:
            config.set(key, value)
    config.train.validate()
    return config
