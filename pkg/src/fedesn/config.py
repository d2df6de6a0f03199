"""Flat key = value scenario configuration files.

Lines hold one ``key = value`` pair; ``#`` starts a comment.  Keys map
one-to-one onto ScenarioConfig and RadioParams field names, and anything
unrecognized is a hard error so typos cannot silently fall back to
defaults.
"""

import dataclasses

from .radio import RadioParams
from .scenario import ScenarioConfig


class ConfigError(ValueError):
    pass


_SCENARIO_FIELDS = {
    f.name: f.type for f in dataclasses.fields(ScenarioConfig) if f.name != "radio"
}
_RADIO_FIELDS = {f.name: f.type for f in dataclasses.fields(RadioParams)}
_OVERLAP = set(_SCENARIO_FIELDS) & set(_RADIO_FIELDS)
assert not _OVERLAP, f"ambiguous config keys: {_OVERLAP}"


def _parse_value(key, raw):
    raw = raw.strip()
    if key == "arms":
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in _SCENARIO_FIELDS and key not in _RADIO_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_scenario_config(path, overrides=None) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a file plus optional overrides."""
    with open(path) as f:
        values = parse_config_text(f.read())
    values.update(overrides or {})
    radio_kwargs = {k: v for k, v in values.items() if k in _RADIO_FIELDS}
    scen_kwargs = {k: v for k, v in values.items() if k in _SCENARIO_FIELDS}
    unknown = set(values) - set(radio_kwargs) - set(scen_kwargs)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    try:
        cfg = ScenarioConfig(radio=RadioParams(**radio_kwargs), **scen_kwargs)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def default_config_text() -> str:
    """A commented config carrying every key at its default."""
    lines = ["# scenario"]
    for f in dataclasses.fields(ScenarioConfig):
        if f.name == "radio":
            continue
        default = f.default
        if default is dataclasses.MISSING:
            default = f.default_factory()
        if f.name == "arms":
            default = ",".join(default)
        lines.append(f"{f.name} = {default}")
    lines.append("")
    lines.append("# radio")
    for f in dataclasses.fields(RadioParams):
        lines.append(f"{f.name} = {f.default}")
    return "\n".join(lines) + "\n"
