"""Flat key=value run configuration with dotted sections.

Parsing is strict: unknown keys, duplicate keys, or out-of-range values
are errors (with line diagnostics).  Defaults are filled in and recorded,
so a loaded config always echoes every effective key.  Environment
variables with the prefix ``NLSLAB_`` override file values (dots become
double underscores: ``NLSLAB_MODEL__N=3``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ConfigError
from .ground import validate_intercritical

__all__ = ["RunConfig", "load_config", "default_config", "ENV_PREFIX"]

ENV_PREFIX = "NLSLAB_"

# key -> (type, default).  dt_min/t_back/identity_n use 0 for "auto".
DEFAULTS: dict[str, tuple[type, object]] = {
    "model.N": (int, 3),
    "model.p": (float, 3.0),
    "grid.rmax": (float, 30.0),
    "grid.n": (int, 3000),
    "ground.polish": (bool, True),
    "ground.bracket_lo": (float, 1.0),
    "ground.bracket_hi": (float, 20.0),
    "ground.a_tol": (float, 1e-13),
    "spectrum.dense_nodes": (int, 2200),
    "spectrum.refine_tol": (float, 1e-12),
    "evolve.dt": (float, 1e-3),
    "evolve.t_end": (float, 1.0),
    "evolve.sponge": (bool, False),
    "evolve.sponge_strength": (float, 5.0),
    "evolve.sponge_width": (float, 0.15),
    "evolve.adapt_trigger": (float, 1.25),
    "evolve.dt_min": (float, 0.0),
    "evolve.sample_every": (int, 10),
    "evolve.snapshot_every": (int, 0),
    "evolve.order": (int, 2),
    "evolve.mass_guard": (float, 1e-3),
    "experiment.A": (float, 1.0),
    "experiment.k": (int, 3),
    "experiment.delta": (float, 0.1),
    "experiment.t_back": (float, 0.0),
    "experiment.sweep_eps": (str, "-0.1,0.1"),
    "check.pohozaev_tol": (float, 1e-6),
    "check.mass_tol": (float, 1e-6),
    "check.gn_tol": (float, 1e-6),
    "check.tail_tol": (float, 1e-2),
    "check.spectrum_tol": (float, 1e-6),
    "check.rate_margin": (float, 0.95),
    "check.identity_n": (int, 0),
    "run.seed": (int, 12345),
    "run.deterministic": (bool, True),
}

ALIASES = {"N": "model.N", "p": "model.p"}


@dataclass
class RunConfig:
    """Effective configuration: every key present, plus the source text."""

    values: dict
    raw_text: str

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def render(self) -> str:
        """Canonical echo: every effective key, sorted, one per line."""
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, text: str, line_no: int):
    typ, _ = DEFAULTS[key]
    text = text.strip()
    try:
        if typ is bool:
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if typ is int:
            v = int(text)
        elif typ is float:
            v = float(text)
        else:
            v = text
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: key {key!r}: {exc}") from exc
    return v


def _validate(values: dict) -> None:
    N, p = values["model.N"], values["model.p"]
    try:
        validate_intercritical(N, p)
    except Exception as exc:
        raise ConfigError(f"model.N/model.p: {exc}") from exc
    if values["grid.rmax"] <= 0:
        raise ConfigError(f"grid.rmax must be positive, got {values['grid.rmax']}")
    if values["grid.n"] < 16:
        raise ConfigError(f"grid.n must be >= 16, got {values['grid.n']}")
    if values["evolve.dt"] <= 0:
        raise ConfigError(f"evolve.dt must be positive, got {values['evolve.dt']}")
    if values["evolve.order"] not in (2, 4):
        raise ConfigError(f"evolve.order must be 2 or 4, got {values['evolve.order']}")
    if not (0 < values["experiment.delta"] <= 0.2):
        raise ConfigError(
            f"experiment.delta must lie in (0, 0.2], got {values['experiment.delta']}")
    if values["experiment.k"] < 1:
        raise ConfigError(f"experiment.k must be >= 1, got {values['experiment.k']}")


def _parse_text(text: str) -> dict:
    parsed: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        key = ALIASES.get(key, key)
        if key not in DEFAULTS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in parsed:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        parsed[key] = _coerce(key, val, line_no)
    return parsed


def _apply_env(values: dict) -> None:
    for key in DEFAULTS:
        env_key = ENV_PREFIX + key.replace(".", "__").upper()
        if env_key in os.environ:
            values[key] = _coerce(key, os.environ[env_key], 0)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load (or default) a config; precedence defaults < file < env < overrides."""
    text = ""
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    parsed = _parse_text(text)
    values = {key: default for key, (_, default) in DEFAULTS.items()}
    values.update(parsed)
    _apply_env(values)
    if overrides:
        for key, val in overrides.items():
            key = ALIASES.get(key, key)
            if key not in DEFAULTS:
                raise ConfigError(f"unknown override key {key!r}")
            if val is not None:
                values[key] = val
    _validate(values)
    return RunConfig(values=values, raw_text=text)


def default_config(**overrides) -> RunConfig:
    return load_config(path=None, overrides=overrides)
