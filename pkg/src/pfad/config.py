"""Run configuration: flat ``key = value`` files plus command-line overrides.

Every key has a default below. Unknown keys are rejected with the offending
key named. Precedence, lowest first: built-in default, profile default,
config file, command-line flag.
"""

import math
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # shared
    profile: str = "desk"  # "desk" (64 px, T=100) or "paper" (256 px, T=1000)
    seed: int = 0
    workers: int = 0  # 0 means one per logical core
    image_format: str = "pfim"  # "pfim" (lossless float32) or "png" (16 bit)

    # phantoms / simulation
    input_dir: str = ""  # clean images; empty means generate phantoms
    phantom_count: int = 8
    phantom_size: int = 64
    phantom_ellipses: int = 6
    simulator: str = "rigid"  # "rigid" or "respiratory"
    k0: float = math.pi / 10
    pixel_spacing_cm: float = 0.28  # 64 px across the 256 x 0.07 cm field of view
    delta_min: float = 2.5
    delta_max: float = 3.0
    rotation_max_deg: float = 2.0
    resp_delta_min: float = 1.1
    resp_delta_max: float = 1.2
    resp_period_min: float = 0.1
    resp_period_max: float = 5.0
    resp_phase_max: float = math.pi / 4

    # diffusion schedule (beta_* <= 0 means "default rescaled to T")
    T: int = 100
    beta_start: float = 0.0
    beta_end: float = 0.0

    # training
    manifest: str = ""
    train_dir: str = ""
    train_count: int = 256
    steps: int = 2000
    batch_size: int = 4
    lr: float = 1e-4
    base_channels: int = 16
    holdout_fraction: float = 0.1

    # purification
    checkpoint: str = ""
    oracle: bool = False
    oracle_target_dir: str = ""  # empty: the oracle targets the input itself
    reference_dir: str = ""  # optional clean images for the per-image report
    a: float = 0.7
    cutoff: float = math.pi / 10
    grid_size: int = 16
    phase_axis: int = 0
    gamma_override: float = -1.0  # negative: use the schedule
    mask_mode: str = "alternate"
    weight_freq: bool = True
    weight_pixel: bool = True
    trace: bool = False

    # evaluation
    candidate_dir: str = ""
    baseline_dir: str = ""


PROFILES = {
    "desk": {"phantom_size": 64, "T": 100, "pixel_spacing_cm": 0.28},
    "paper": {"phantom_size": 256, "T": 1000, "pixel_spacing_cm": 0.07},
}

FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key, raw):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = FIELD_TYPES[key]
    text = raw.strip()
    try:
        if kind is bool or kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int or kind == "int":
            return int(text)
        if kind is float or kind == "float":
            return _parse_float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r}") from None


def _parse_float(text):
    # allow "pi/10"-style values, which read better for angles
    if "pi" in text:
        expr = text.replace(" ", "")
        num, _, den = expr.partition("/")
        mult = num.replace("pi", "").rstrip("*") or "1"
        return float(mult) * math.pi / (float(den) if den else 1.0)
    return float(text)


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        values[key] = coerce(key, value)
    return values


def load_config(path=None, overrides=None):
    """Build a :class:`RunConfig` from an optional file and override pairs."""
    file_values = {}
    if path:
        try:
            with open(path) as fh:
                file_values = parse_config_text(fh.read(), path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    flag_values = {k: coerce(k, v) for k, v in (overrides or {}).items()}

    profile = flag_values.get("profile", file_values.get("profile", "desk"))
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    merged = dict(PROFILES[profile])
    merged.update(file_values)
    merged.update(flag_values)
    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg):
    choices = {
        "simulator": ("rigid", "respiratory"),
        "image_format": ("pfim", "png"),
        "mask_mode": ("alternate", "none", "full"),
    }
    for key, allowed in choices.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {getattr(cfg, key)!r}")
    if cfg.phase_axis not in (0, 1):
        raise ConfigError("phase_axis must be 0 or 1")
    if not 0.0 <= cfg.a <= 1.0:
        raise ConfigError("a must lie in [0, 1]")
    if cfg.T < 1:
        raise ConfigError("T must be >= 1")
