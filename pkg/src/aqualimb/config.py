"""Session configuration and the key-value config file format.

The file is plain ``section.key = value`` lines (# comments allowed); keys
route into the module configs by dataclass field name, e.g.::

    scheme = multimodal
    gains.k4 = 45
    segmenter.k_sigma = 12
    mfcc.n_filters = 26
    plant.tau_servo = 0.1
    train.epochs = 30
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import DataError
from .mapper import GainConfig
from .mfcc import MfccConfig
from .nn import TrainConfig
from .preprocess import SegmenterConfig
from .superlimb_sim import PlantConfig


@dataclass
class SessionConfig:
    scheme: str = "multimodal"
    seed: int = 0
    speed: float = 1.0            # replay pacing factor (1.0 = real time)
    tick_s: float = 0.25          # multimodal decision tick for head tokens
    imu_decimate: int = 1
    telemetry_port: int = 8765
    template_path: str = ""
    model_path: str = ""
    gains: GainConfig = field(default_factory=GainConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    plant: PlantConfig = field(default_factory=PlantConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_SECTIONS = ("gains", "segmenter", "mfcc", "plant", "train")


def _coerce(raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    if raw.lower() in ("none", "null", ""):
        return None
    return raw


def _field_type(cfg_obj, name):
    for f in fields(cfg_obj):
        if f.name == name:
            t = f.type
            if isinstance(t, str):
                t = {"int": int, "float": float, "str": str, "bool": bool,
                     "float | None": float, "int | None": int}.get(t, str)
            return t
    raise KeyError(name)


def parse_config_text(text, base: SessionConfig | None = None) -> SessionConfig:
    cfg = base or SessionConfig()
    sections = {name: getattr(cfg, name) for name in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataError(f"config line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        try:
            if "." in key:
                section, _, name = key.partition(".")
                if section not in sections:
                    raise DataError(f"config line {lineno}: unknown section {section!r}")
                obj = sections[section]
                target = _field_type(obj, name)
                sections[section] = replace(obj, **{name: _coerce(raw, target)})
            else:
                target = _field_type(cfg, key)
                setattr(cfg, key, _coerce(raw, target))
        except KeyError:
            raise DataError(f"config line {lineno}: unknown key {key!r}") from None
        except (ValueError, TypeError) as exc:
            raise DataError(f"config line {lineno}: bad value for {key!r}: {exc}") from None
    for name in _SECTIONS:
        setattr(cfg, name, sections[name])
    return cfg


def load_config(path, base: SessionConfig | None = None) -> SessionConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base=base)
