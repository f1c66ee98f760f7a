"""Sectioned INI configuration with typed values, dotted overrides and resolved snapshots."""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from . import dsp
from .errors import ConfigError
from .harness import LinkConfig
from .neural import TrainConfig, cnn_specs, dnn_specs
from .neural.model import DNN_HIDDEN

__all__ = ["Config", "load_config", "default_config", "parse_override"]


@dataclasses.dataclass(frozen=True)
class CnnArch:
    width: int = 32
    kernel: int = 9
    blocks: int = 2
    alpha: float = 0.01
    init_seed: int = 0


@dataclasses.dataclass(frozen=True)
class DnnArch:
    hidden: tuple[int, ...] = DNN_HIDDEN
    alpha: float = 0.01
    init_seed: int = 0


_DNN_TRAIN = dict(loss="mse", lr_init=1e-3, minibatch_size=256, l2=0.0, esn0_range_db=(8.0, 16.0))

# section -> (dataclass, defaults overriding the dataclass ones, excluded fields)
_SECTIONS = {
    "link": (LinkConfig, {}, {"pulse"}),
    "pulse": (dsp.PulseSpec, {}, {"nyquist_symbol_time"}),
    "cnn": (CnnArch, {}, set()),
    "dnn": (DnnArch, {}, set()),
    "train": (TrainConfig, {}, set()),
    "dnn_train": (TrainConfig, _DNN_TRAIN, set()),
}
_PATHS = {"model_dir": ""}


def _schema():
    out = {}
    for section, (cls, extra, skip) in _SECTIONS.items():
        keys = {}
        for f in dataclasses.fields(cls):
            if f.name in skip or not f.init:
                continue
            default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
            keys[f.name] = (str(f.type), extra.get(f.name, default))
        out[section] = keys
    out["paths"] = {k: ("str", v) for k, v in _PATHS.items()}
    return out


SCHEMA = _schema()


def _parse_scalar(text, typ):
    text = text.strip()
    if typ == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ == "int":
        return int(text)
    if typ == "float":
        return float(text)
    return text


def _parse(text: str, typ: str):
    parts = [p.strip() for p in typ.split("|")]
    if "None" in parts:
        if text.strip().lower() in ("", "none", "auto"):
            return None
        parts.remove("None")
    typ = parts[0]
    if typ.startswith("tuple["):
        inner = typ[len("tuple["):-1].split(",")[0].strip()
        items = [t for t in text.replace("(", "").replace(")", "").split(",") if t.strip()]
        return tuple(_parse_scalar(t, inner) for t in items)
    return _parse_scalar(text, typ)


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form key=value")
    return key.strip(), value.strip()


class Config:
    """Typed values per section; build domain objects with the accessor methods."""

    def __init__(self, values: dict[str, dict] | None = None):
        self.values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for section, keys in (values or {}).items():
            for key, value in keys.items():
                self.set(f"{section}.{key}", value)

    def _targets(self, key: str) -> list[tuple[str, str]]:
        if "." in key:
            section, name = key.split(".", 1)
            if section not in SCHEMA or name not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {key!r}")
            return [(section, name)]
        hits = [(s, key) for s, keys in SCHEMA.items() if key in keys]
        if not hits:
            raise ConfigError(f"unknown config key {key!r}")
        return hits

    def set(self, key: str, value) -> None:
        """Set ``section.key``; an unqualified key sets it in every section that defines it."""
        for section, name in self._targets(key):
            typ = SCHEMA[section][name][0]
            if isinstance(value, str):
                try:
                    value_t = _parse(value, typ)
                except ValueError as exc:
                    raise ConfigError(f"{section}.{name}: {exc}") from None
            else:
                value_t = value
            self.values[section][name] = value_t

    def get(self, key: str):
        section, name = self._targets(key)[0]
        return self.values[section][name]

    def apply_overrides(self, overrides) -> "Config":
        for item in overrides or ():
            self.set(*parse_override(item))
        return self

    # -- domain objects ------------------------------------------------------

    def _build(self, section, cls, **extra):
        try:
            return cls(**self.values[section], **extra)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None

    def pulse(self) -> dsp.PulseSpec:
        return self._build("pulse", dsp.PulseSpec, nyquist_symbol_time=self.values["link"]["t_n"])

    def link(self) -> LinkConfig:
        return self._build("link", LinkConfig, pulse=self.pulse())

    def train_config(self, model: str = "cnn") -> TrainConfig:
        return self._build("train" if model == "cnn" else "dnn_train", TrainConfig)

    def cnn_arch(self) -> CnnArch:
        return self._build("cnn", CnnArch)

    def dnn_arch(self) -> DnnArch:
        return self._build("dnn", DnnArch)

    def model_specs(self, model: str):
        link = self.values["link"]
        if model == "cnn":
            a = self.cnn_arch()
            return cnn_specs(n_s=link["n_s"], m=link["m"], width=a.width, kernel=a.kernel,
                             blocks=a.blocks, alpha=a.alpha)
        a = self.dnn_arch()
        return dnn_specs(n_out=link["n_s"] * link["m"], hidden=a.hidden, alpha=a.alpha)

    # -- text ----------------------------------------------------------------

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        for section, keys in self.values.items():
            cp[section] = {k: _format(v) for k, v in keys.items()}
        return cp

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            self.to_parser().write(fh)


def default_config() -> Config:
    return Config()


def load_config(path, overrides=()) -> Config:
    """Read an INI file; unknown sections or keys raise :class:`ConfigError`."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = Config()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in cp[section].items():
            cfg.set(f"{section}.{key}", value)
    return cfg.apply_overrides(overrides)
