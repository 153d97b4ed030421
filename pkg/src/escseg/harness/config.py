"""Run configuration: one flat dataclass, a TOML loader, dotted overrides.

Config files may group keys into any tables they like ("model.K = 128" and
"[model] K = 128" both address the field K); section names carry no meaning
beyond readability. The `reference` table in `default_config_toml` echoes the
published training recipe this code scales down from, so a full-size run is
one edit away.
"""

import dataclasses
from dataclasses import dataclass
from typing import Tuple

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from ..events.types import ConfigurationError, InputError

SCHEDULERS = ("cyclic", "warmup-poly", "constant")


@dataclass
class RunConfig:
    # model
    K: int = 128
    n: int = 256
    alpha: float = 0.25
    beta: float = 0.1
    bins: int = 5
    categories: int = 11
    heads: int = 4
    image_widths: Tuple[int, ...] = (32, 64, 128, 160)
    image_depths: Tuple[int, ...] = (2, 2, 2, 2)
    event_widths: Tuple[int, ...] = (16, 32, 64, 96)
    event_depths: Tuple[int, ...] = (1, 1, 1, 1)
    # augmentation
    crop: int = 128
    resize_min: float = 0.5
    resize_max: float = 2.0
    jitter: bool = True
    flip: bool = True
    blur: bool = True
    # optimization (desk-scale schedule; see reference_defaults for full size)
    lr: float = 6e-4
    decoder_lr_mult: float = 10.0
    weight_decay: float = 0.01
    scheduler: str = "cyclic"
    max_lr_factor: float = 1.6
    cycle_epochs: int = 10
    poly_power: float = 0.9
    warmup_steps: int = 20
    steps: int = 400
    batch_size: int = 4
    val_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.K < 2 or self.n < 1:
            raise ConfigurationError("K must be >= 2 and n >= 1")
        if self.categories < 2:
            raise ConfigurationError("need at least 2 categories")
        if self.n % self.heads:
            raise ConfigurationError("heads must divide n")
        if not 0.0 < self.alpha or self.beta < 0.0:
            raise ConfigurationError("alpha must be positive, beta non-negative")
        if self.crop < 32 or self.crop % 32:
            raise ConfigurationError("crop must be a positive multiple of 32")
        if not 0.0 < self.resize_min <= self.resize_max:
            raise ConfigurationError("resize range must satisfy 0 < min <= max")
        if self.lr <= 0 or self.weight_decay < 0 or self.decoder_lr_mult <= 0:
            raise ConfigurationError("lr and decoder_lr_mult must be positive")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(f"scheduler must be one of {SCHEDULERS}")
        if self.max_lr_factor < 1.0 or self.cycle_epochs < 1:
            raise ConfigurationError("max_lr_factor >= 1 and cycle_epochs >= 1")
        if self.steps < 1 or self.batch_size < 1 or self.val_every < 1:
            raise ConfigurationError("steps, batch_size, val_every must be positive")
        for name in ("image_widths", "image_depths", "event_widths", "event_depths"):
            value = tuple(int(v) for v in getattr(self, name))
            if len(value) != 4 or any(v < 1 for v in value):
                raise ConfigurationError(f"{name} must list 4 positive stage values")
            setattr(self, name, value)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _flatten(table, out, path=""):
    for key, value in table.items():
        if isinstance(value, dict):
            _flatten(value, out, f"{path}{key}.")
        else:
            out[f"{path}{key}"] = value
    return out


def _coerce(name: str, value):
    """Map a TOML value onto the field's declared type."""
    field = _FIELDS.get(name)
    if field is None:
        raise ConfigurationError(f"unknown config key: {name}")
    kind = field.type
    if kind == "bool" or isinstance(field.default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{name} expects a boolean, got {value!r}")
        return value
    if isinstance(field.default, int) and not isinstance(field.default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{name} expects an integer, got {value!r}")
        if float(value) != int(value):
            raise ConfigurationError(f"{name} expects an integer, got {value!r}")
        return int(value)
    if isinstance(field.default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{name} expects a number, got {value!r}")
        return float(value)
    if isinstance(field.default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{name} expects a list, got {value!r}")
        return tuple(value)
    return value


def apply_overrides(values: dict, overrides) -> dict:
    """`key=value` strings, dotted paths allowed, values parsed as TOML."""
    for item in overrides:
        if "=" not in item:
            raise InputError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip().split(".")[-1]
        try:
            parsed = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = raw.strip()
        values[key] = parsed
    return values


def load_config(path=None, overrides=()) -> RunConfig:
    values = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                table = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise InputError(f"bad config file {path}: {exc}") from exc
        table.pop("reference", None)
        _flatten(table, values)
        values = {k.split(".")[-1]: v for k, v in values.items()}
    apply_overrides(values, overrides)
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


def reference_defaults() -> dict:
    """The full-size recipe the desk-scale defaults are cut down from."""
    return {
        "K": 128, "n": 256, "alpha": 0.25, "beta": 0.1,
        "bins": 5, "categories": 11,
        "crop": 256, "resize_min": 0.5, "resize_max": 2.0,
        "decoder_lr_mult": 10.0, "scheduler": "cyclic", "max_lr_factor": 1.6,
        "cycle_epochs": 10, "epochs": 300, "batch_size": 16,
    }


def default_config_toml() -> str:
    """A commented starter config, desk-scale values active."""
    cfg = RunConfig()
    lines = ["# escseg run configuration", "", "[model]"]
    for key in ("K", "n", "alpha", "beta", "bins", "categories", "heads"):
        lines.append(f"{key} = {getattr(cfg, key)}")
    lines += ["", "[augment]"]
    for key in ("crop", "resize_min", "resize_max", "jitter", "flip", "blur"):
        value = getattr(cfg, key)
        lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
    lines += ["", "[optim]"]
    for key in ("lr", "decoder_lr_mult", "weight_decay", "scheduler",
                "max_lr_factor", "cycle_epochs", "steps", "batch_size", "seed"):
        value = getattr(cfg, key)
        lines.append(f'{key} = "{value}"' if isinstance(value, str) else f"{key} = {value}")
    lines += ["", "# full-size recipe, for reference (not loaded)", "[reference]"]
    for key, value in reference_defaults().items():
        lines.append(f'{key} = "{value}"' if isinstance(value, str) else f"{key} = {value}")
    return "\n".join(lines) + "\n"
