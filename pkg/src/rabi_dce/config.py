"""Run configuration: file parsing, figure presets, overrides and validation.

Resolution order is preset values, then file keys, then command-line
overrides. Keys are unique across sections, so an override names only the
key and the section is looked up.
"""

import copy
import hashlib
import json
import logging
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import pyparsing as pp
from pydantic import BaseModel, ValidationError

from rabi_dce import grammar
from rabi_dce.errors import ConfigError
from rabi_dce.schemas import (
    AnalysisConfig,
    HilbertConfig,
    IntegratorConfig,
    OutputConfig,
    RunConfig,
    SweepConfig,
    SystemParams,
)

logger = logging.getLogger(__name__)

SECTION_MODELS: dict[str, type[BaseModel]] = {
    "system": SystemParams,
    "hilbert": HilbertConfig,
    "integrator": IntegratorConfig,
    "analysis": AnalysisConfig,
    "output": OutputConfig,
    "sweep": SweepConfig,
}
RUN_KEYS = ("preset", "dissipation_on")
SECTIONS = ("run", *SECTION_MODELS)

KEY_SECTIONS: dict[str, str] = {key: "run" for key in RUN_KEYS}
KEY_SECTIONS["eps_rel"] = "system"
for _section, _model in SECTION_MODELS.items():
    KEY_SECTIONS.update({field: _section for field in _model.model_fields})

# Keys a configuration without preset has to give (plus one of eps / eps_rel)
REQUIRED_SYSTEM_KEYS = ("g", "omega0", "eta0", "alpha", "gamma", "gamma_phi", "kappa")

# Axes a sweep may vary
SWEEP_SECTIONS = ("system", "hilbert", "integrator")

# Figure parameter sets; λ and λ_φ of the captions are the qubit rates γ and γ_φ.
PRESETS: dict[str, dict[str, Any]] = {
    "fig1": {
        "g": 0.05,
        "omega0": 0.5,
        "eps_rel": 0.08,
        "eta0": 2.00655,
        "alpha": 2e-8,
        "gamma": 1e-6,
        "gamma_phi": 1e-6,
        "kappa": 1e-6,
    },
    "fig2": {
        "g": 0.05,
        "omega0": 0.5,
        "eps_rel": 0.08,
        "eta0": 2.00715,
        "alpha": -5e-8,
        "gamma": 1e-6,
        "gamma_phi": 1e-6,
        "kappa": 1e-6,
    },
    "fig4": {
        "g": 0.15,
        "omega0": 2.9,
        "eps_rel": 0.08,
        "eta0": 3.931,
        "alpha": 8e-7,
        "gamma": 1e-6,
        "gamma_phi": 1e-6,
        "kappa": 1e-6,
    },
}
PRESETS["fig5"] = {**PRESETS["fig4"], "alpha": 2e-6}

PRESET_RUN_DEFAULTS: dict[str, dict[str, Any]] = {
    "integrator": {"t_final": 3e4},
    "analysis": {"snapshot_times": [2e4, 3e4]},
}


def _plain(token: Any) -> Any:
    if isinstance(token, pp.ParseResults):
        return token.as_list()
    return token


def _section_of(key: str) -> str:
    try:
        return KEY_SECTIONS[key]
    except KeyError:
        valid = ", ".join(sorted(KEY_SECTIONS))
        raise ConfigError(f"Unknown key '{key}'; valid keys: {valid}") from None


def parse_config_text(text: str) -> dict[str, dict[str, Any]]:
    """Parse configuration text into ``{section: {key: value}}``.

    Raises:
        ConfigError: If the text is empty, does not parse, names an unknown
            section or key, or repeats a key
    """
    if not text or not text.strip():
        raise ConfigError("Configuration text is empty")

    try:
        parsed = grammar.config.parse_string(text, parse_all=True)
    except pp.ParseBaseException as e:
        raise ConfigError(f"Failed to parse configuration at line {e.lineno}, column {e.col}: {e.msg}") from e

    sections: dict[str, dict[str, Any]] = {}
    for name, attributes in parsed:
        if name not in SECTIONS:
            raise ConfigError(f"Unknown section '{name}'; valid sections: {', '.join(SECTIONS)}")
        body = sections.setdefault(name, {})
        for key, raw in attributes:
            expected = _section_of(key)
            if expected != name:
                raise ConfigError(f"Key '{key}' belongs in section '{expected}', not '{name}'")
            if key in body:
                raise ConfigError(f"Duplicate key '{key}' in section '{name}'")
            body[key] = _plain(raw)

    if not sections:
        raise ConfigError("Configuration has no sections")
    return sections


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with the value in file syntax, e.g. ``alpha=-5e-8``."""
    try:
        key, raw = grammar.override.parse_string(text.strip(), parse_all=True)
    except pp.ParseBaseException as e:
        raise ConfigError(f"Invalid override '{text}': expected key=value") from e
    _section_of(key)
    return key, _plain(raw)


def apply_preset(name: str) -> dict[str, dict[str, Any]]:
    """Sections a preset contributes: its system keys and the run defaults."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset '{name}'; valid presets: {', '.join(PRESETS)}")
    sections = copy.deepcopy(PRESET_RUN_DEFAULTS)
    sections["system"] = dict(PRESETS[name])
    sections["run"] = {"preset": name}
    return sections


def _merge(base: dict[str, dict[str, Any]], key: str, value: Any, *, preset: str | None) -> None:
    section = _section_of(key)
    body = base.setdefault(section, {})
    if section == "system" and key in ("eps", "eps_rel"):
        other = "eps_rel" if key == "eps" else "eps"
        if other in body:
            logger.warning("%s=%r replaces %s=%r", key, value, other, body.pop(other))
    elif preset is not None and key in body and body[key] != value and section != "run":
        logger.warning("preset %s: %s overridden, %r -> %r", preset, key, body[key], value)
    body[key] = value


def resolve_config(
    sections: Mapping[str, Mapping[str, Any]],
    overrides: Mapping[str, Any] | Iterable[tuple[str, Any]] = (),
) -> RunConfig:
    """Merge preset, file sections and overrides, and validate the result."""
    items = list(overrides.items()) if isinstance(overrides, Mapping) else list(overrides)
    explicit = [(key, value) for body in sections.values() for key, value in body.items()] + items

    preset = None
    for key, value in explicit:
        _section_of(key)
        if key == "preset":
            preset = value
    file_keys = {key for body in sections.values() for key in body}
    if {"eps", "eps_rel"} <= file_keys or {"eps", "eps_rel"} <= {key for key, _ in items}:
        raise ConfigError("Give either eps or eps_rel, not both")
    merged = apply_preset(preset) if preset is not None else {}

    for key, value in explicit:
        _merge(merged, key, value, preset=preset)

    system = merged.get("system", {})
    if preset is None:
        missing = [key for key in REQUIRED_SYSTEM_KEYS if key not in system]
        if "eps" not in system and "eps_rel" not in system:
            missing.append("eps or eps_rel")
        if missing:
            raise ConfigError(f"Missing required keys: {', '.join(missing)}")

    data: dict[str, Any] = {name: body for name, body in merged.items() if name != "run"}
    data.update(merged.get("run", {}))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def load_config(path: str | Path, overrides: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e
    return resolve_config(parse_config_text(text), overrides)


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def config_from_json(text: str) -> RunConfig:
    """Inverse of canonical_json, for configs embedded in outputs."""
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"Embedded configuration is invalid: {e}") from e


def with_values(
    config: RunConfig,
    values: Mapping[str, Any] | Iterable[tuple[str, Any]],
    *,
    sections: Iterable[str] = SWEEP_SECTIONS,
) -> RunConfig:
    """Copy of ``config`` with keys of the given sections replaced."""
    allowed = tuple(sections)
    data = config.model_dump()
    for key, value in values.items() if isinstance(values, Mapping) else values:
        section = _section_of(key)
        if section not in allowed:
            raise ConfigError(f"'{key}' cannot be changed here; choose a key of {', '.join(allowed)}")
        if key == "eps_rel":
            data["system"].pop("eps", None)
        elif key == "eps":
            data["system"].pop("eps_rel", None)
        elif key == "n_fock" and isinstance(value, int) and data["hilbert"].get("tail_levels", 0) >= value:
            dropped = data["hilbert"].pop("tail_levels")
            logger.info("tail_levels=%d does not fit n_fock=%d; using the default", dropped, value)
        data[section][key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def parse_value(text: str) -> Any:
    """A single value in file syntax: number, string, boolean or array."""
    try:
        return _plain(grammar.value_only.parse_string(text.strip(), parse_all=True)[0])
    except pp.ParseBaseException as e:
        raise ConfigError(f"Invalid value '{text}': {e.msg}") from e
