"""Run configuration: TOML schema, strict loading, canonical hashing.

Schema (every key optional, defaults shown)::

    [physics]   mu = 1.0, kappa = 1.0, R = 2/3, c_v = 1.0, A = 1.0
                gamma = <unset>          # if set, R = (gamma - 1) c_v; do not also set R
                                         # (resolved into R on load)
    [profile]   family = "power_law"     # or "table"
                K_rho = 1.0, ell_rho = 2.0
                table = ""               # path with columns y, rho0[, v0]
    [initial]   v_amplitude = 0.5, v_width = 5.0, s0 = 0.0, J0 = 1.0
    [grid]      L = 50.0, N = 2048, buffer_fraction = 0.125
    [control]   dt_init = 1e-4, dt_min = 1e-12, dt_max = 1e-2, safety = 0.5,
                max_retries = 20, reaction_cap = 0.9, growth = 1.2,
                dt_per_h = 0.02          # > 0: dt_init = dt_max = dt_per_h * h
    [run]       T = 0.5, epsilon = 1e-10, n_outputs = 4, seed = 0,
                allow_sandwich = false, snapshots = true
    [ladder]    n_levels = 33, lower_span = 20.0, upper_span = 20.0

Unknown sections or keys are errors.  The hash is the sha256 of the
canonical JSON form (sorted keys, no whitespace, shortest round-trip floats).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class PhysicsCfg:
    mu: float = 1.0
    kappa: float = 1.0
    R: float = 2.0 / 3.0
    c_v: float = 1.0
    A: float = 1.0
    gamma: float | None = None


@dataclass
class ProfileCfg:
    family: str = "power_law"
    K_rho: float = 1.0
    ell_rho: float = 2.0
    table: str = ""


@dataclass
class InitialCfg:
    v_amplitude: float = 0.5
    v_width: float = 5.0
    s0: float = 0.0
    J0: float = 1.0


@dataclass
class GridCfg:
    L: float = 50.0
    N: int = 2048
    buffer_fraction: float = 0.125


@dataclass
class ControlCfg:
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    safety: float = 0.5
    max_retries: int = 20
    reaction_cap: float = 0.9
    growth: float = 1.2
    dt_per_h: float = 0.02


@dataclass
class RunCfg:
    T: float = 0.5
    epsilon: float = 1e-10
    n_outputs: int = 4
    seed: int = 0
    allow_sandwich: bool = False
    snapshots: bool = True


@dataclass
class LadderCfg:
    n_levels: int = 33
    lower_span: float = 20.0
    upper_span: float = 20.0


@dataclass
class RunConfig:
    physics: PhysicsCfg = field(default_factory=PhysicsCfg)
    profile: ProfileCfg = field(default_factory=ProfileCfg)
    initial: InitialCfg = field(default_factory=InitialCfg)
    grid: GridCfg = field(default_factory=GridCfg)
    control: ControlCfg = field(default_factory=ControlCfg)
    run: RunCfg = field(default_factory=RunCfg)
    ladder: LadderCfg = field(default_factory=LadderCfg)

    def to_dict(self) -> dict[str, dict[str, Any]]:
        out = dataclasses.asdict(self)
        if out["physics"]["gamma"] is None:
            del out["physics"]["gamma"]
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def replace(self, section: str, key: str, value) -> "RunConfig":
        """Copy with one entry changed (value coerced and validated)."""
        data = self.to_dict()
        data.setdefault(section, {})[key] = value
        if (section, key) == ("physics", "gamma"):
            data["physics"].pop("R", None)
        return from_dict(data)


SWEEP_AXES = {
    "ell_rho": ("profile", "ell_rho"),
    "L": ("grid", "L"),
    "N": ("grid", "N"),
    "gamma": ("physics", "gamma"),
    "T": ("run", "T"),
    "epsilon": ("run", "epsilon"),
}


def _coerce(key: str, value, ftype: str):
    if ftype == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if ftype == "int":
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    if ftype.startswith("float"):
        if value is None and "None" in ftype:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if ftype == "str":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    raise AssertionError(ftype)


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a table of sections")
    sections = {f.name: f for f in dataclasses.fields(RunConfig)}
    built = {}
    for name, body in data.items():
        if name not in sections:
            raise ConfigError(name, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(name, "expected a table")
        cls = sections[name].default_factory
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for key, value in body.items():
            full = f"{name}.{key}"
            if key not in fields:
                raise ConfigError(full, "unknown key")
            kw[key] = _coerce(full, value, fields[key].replace(" | None", "None").replace(" ", ""))
        built[name] = cls(**kw)
    cfg = RunConfig(**built)
    _check(cfg, data)
    phys = cfg.physics
    if phys.gamma is not None:
        # stored resolved, so the hash depends only on the physics actually used
        if not phys.gamma > 1:
            raise ConfigError("physics.gamma", f"must be > 1, got {phys.gamma!r}")
        phys.R, phys.gamma = (phys.gamma - 1.0) * phys.c_v, None
    return cfg


def _check(cfg: RunConfig, raw: dict) -> None:
    phys = raw.get("physics", {})
    if "gamma" in phys and "R" in phys:
        raise ConfigError("physics.gamma", "set either gamma or R, not both")
    if cfg.profile.family not in ("power_law", "table"):
        raise ConfigError("profile.family", f"must be 'power_law' or 'table', got {cfg.profile.family!r}")
    if cfg.profile.family == "table" and not cfg.profile.table:
        raise ConfigError("profile.table", "required when family = 'table'")
    if cfg.run.n_outputs < 1:
        raise ConfigError("run.n_outputs", "must be >= 1")
    if cfg.ladder.n_levels < 2:
        raise ConfigError("ladder.n_levels", "must be >= 2")
    if cfg.control.dt_per_h < 0:
        raise ConfigError("control.dt_per_h", "must be >= 0")


def loads(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"invalid TOML: {exc}") from exc
    return from_dict(data)


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    cfg = loads(text)
    # relative table paths are resolved against the config file
    if cfg.profile.table and not Path(cfg.profile.table).is_absolute():
        cfg.profile.table = str((Path(path).parent / cfg.profile.table).resolve())
    return cfg


__all__ = ["ConfigError", "RunConfig", "SWEEP_AXES", "from_dict", "loads", "load"]
