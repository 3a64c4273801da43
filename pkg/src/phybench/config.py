# Experiment config files.
#
# INI text read with configparser; sections map onto the dataclasses an
# experiment is built from:
#
#   [experiment]  name, snr_grid_db, trials_per_point, master_seed
#   [scenario]    fields of the experiment's scenario dataclass
#   [network]     hidden_sizes, hidden_activation
#   [train]       TrainConfig fields (seed excluded: derived from master_seed)
#
# Every value is typed by the field's default: bool, int, float (inf
# allowed), str, enum (by value or name) or a JSON list for tuples.

import configparser
import dataclasses
import enum
import json
import logging
import math
from pathlib import Path

from .errors import ConfigError, InvalidInputError
from .experiments import ExperimentConfig, ExperimentEntry, ExperimentName, registry

logger = logging.getLogger(__name__)

SECTIONS = ("experiment", "scenario", "network", "train")
EXPERIMENT_KEYS = ("name", "snr_grid_db", "trials_per_point", "master_seed")
DERIVED_KEYS = {"train.seed": "derived from experiment.master_seed"}


def parse_overrides(items) -> list[tuple[str, str]]:
    """'key=value' strings -> (key, value) pairs, order kept."""
    out = []
    for item in items or ():
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(item, "override must look like key=value")
        out.append((key, value.strip()))
    return out


def read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    p = Path(path)
    try:
        with open(p, encoding="utf-8") as f:
            parser.read_file(f, source=str(p))
    except FileNotFoundError:
        raise ConfigError(str(p), "config file not found") from None
    except configparser.Error as exc:
        raise ConfigError(str(p), f"cannot parse: {exc}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, f"unknown section (expected one of {', '.join(SECTIONS)})")
    return parser


def _section_fields(entry: ExperimentEntry) -> dict[str, dict]:
    """section -> {field: default} for every settable key."""
    defaults = entry.default_config()
    return {
        "experiment": {k: getattr(defaults, k) for k in EXPERIMENT_KEYS},
        "scenario": {f.name: getattr(defaults.scenario, f.name) for f in dataclasses.fields(defaults.scenario)},
        "network": {f.name: getattr(defaults.network, f.name) for f in dataclasses.fields(defaults.network)},
        "train": {f.name: getattr(defaults.train, f.name) for f in dataclasses.fields(defaults.train)
                  if f.name != "seed"},
    }


def resolve_key(key: str, fields: dict[str, dict]) -> str:
    """'section.field' or a bare field name -> 'section.field'."""
    if key in DERIVED_KEYS:
        raise ConfigError(key, DERIVED_KEYS[key])
    if "." in key:
        section, name = key.split(".", 1)
        if section not in fields:
            raise ConfigError(key, "unknown section")
        if name not in fields[section]:
            raise ConfigError(key, "unknown key")
        return key
    for section in SECTIONS:
        if key in fields[section]:
            return f"{section}.{key}"
    if key == "seed":
        raise ConfigError("train.seed", DERIVED_KEYS["train.seed"])
    raise ConfigError(key, "unknown key")


def _coerce_enum(raw: str, kind: type[enum.Enum], key_path: str):
    low = raw.lower()
    for member in kind:
        if low in (str(member.value).lower(), member.name.lower()):
            return member
    choices = ", ".join(m.name.lower() for m in kind)
    raise ConfigError(key_path, f"{raw!r} is not one of {choices}")


def _coerce_scalar(raw, default, key_path: str):
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        state = configparser.ConfigParser.BOOLEAN_STATES.get(str(raw).strip().lower())
        if state is None:
            raise ConfigError(key_path, f"{raw!r} is not a boolean")
        return state
    if isinstance(default, enum.Enum):
        return _coerce_enum(str(raw).strip(), type(default), key_path)
    if isinstance(default, int):
        try:
            value = float(raw) if isinstance(raw, float) else int(str(raw).strip())
        except ValueError:
            raise ConfigError(key_path, f"{raw!r} is not an integer") from None
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(key_path, f"{raw!r} is not an integer")
            value = int(value)
        return value
    if isinstance(default, float):
        try:
            value = float(str(raw).strip())
        except ValueError:
            raise ConfigError(key_path, f"{raw!r} is not a number") from None
        if math.isnan(value):
            raise ConfigError(key_path, "NaN is not allowed")
        return value
    return str(raw).strip()


def coerce_value(raw: str, default, key_path: str):
    """Parse raw text into the type of default."""
    if isinstance(default, tuple):
        try:
            items = json.loads(raw)
        except json.JSONDecodeError:
            raise ConfigError(key_path, f"{raw!r} is not a JSON list") from None
        if not isinstance(items, list):
            raise ConfigError(key_path, f"{raw!r} is not a JSON list")
        proto = default[0] if default else 0.0
        return tuple(_coerce_scalar(v, proto, key_path) for v in items)
    return _coerce_scalar(raw, default, key_path)


def _experiment_name(parser: configparser.ConfigParser, overrides) -> ExperimentName:
    raw = None
    if parser.has_option("experiment", "name"):
        raw = parser.get("experiment", "name")
    for key, value in overrides:
        if key in ("name", "experiment.name"):
            raw = value
    if raw is None:
        raise ConfigError("experiment.name", "missing required key")
    return _coerce_enum(raw.strip(), ExperimentName, "experiment.name")


def _culprit(section: str, factory, values: dict) -> str:
    """Key path of the first user-set field whose addition breaks the section."""
    applied: dict = {}
    for key, value in values.items():
        applied[key] = value
        try:
            factory(**applied)
        except (InvalidInputError, TypeError, ValueError):
            return f"{section}.{key}"
    return section


def _build(section: str, factory, values: dict):
    try:
        return factory(**values)
    except (InvalidInputError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(_culprit(section, factory, values), str(exc)) from None


def build_config(parser: configparser.ConfigParser, overrides=()) -> ExperimentConfig:
    """Resolve file values, then overrides, over the experiment's defaults."""
    overrides = list(overrides)
    name = _experiment_name(parser, overrides)
    entry = registry()[name]
    fields = _section_fields(entry)
    values: dict[str, dict] = {s: {} for s in SECTIONS}

    def _set(key_path: str, raw: str):
        section, field_name = key_path.split(".", 1)
        values[section][field_name] = coerce_value(raw, fields[section][field_name], key_path)

    for section in parser.sections():
        for key, raw in parser.items(section):
            _set(resolve_key(f"{section}.{key}", fields), raw)
    for key, raw in overrides:
        _set(resolve_key(key, fields), raw)

    defaults = entry.default_config()
    scenario = _build("scenario", lambda **kw: dataclasses.replace(defaults.scenario, **kw), values["scenario"])
    network = _build("network", lambda **kw: dataclasses.replace(defaults.network, **kw), values["network"])
    train = _build("train", lambda **kw: dataclasses.replace(defaults.train, **kw), values["train"])
    base = dict(fields["experiment"], name=name, scenario=scenario, network=network, train=train)
    user_set = {k: v for k, v in values["experiment"].items() if k != "name"}
    cfg = _build("experiment", lambda **kw: ExperimentConfig(**dict(base, **kw)), user_set)
    logger.debug("resolved config %s (hash %s)", name.value, cfg.config_hash())
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    return build_config(read_config(path), overrides)


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return value.name.lower()
    if isinstance(value, tuple):
        return json.dumps([v.name.lower() if isinstance(v, enum.Enum) else v for v in value])
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that loads back to cfg (train.seed omitted)."""
    lines = ["[experiment]", f"name = {cfg.name.value}", f"snr_grid_db = {_render(cfg.snr_grid_db)}",
             f"trials_per_point = {cfg.trials_per_point}", f"master_seed = {cfg.master_seed}", ""]
    for section, obj in (("scenario", cfg.scenario), ("network", cfg.network), ("train", cfg.train)):
        lines.append(f"[{section}]")
        lines.extend(f"{f.name} = {_render(getattr(obj, f.name))}" for f in dataclasses.fields(obj)
                     if f"{section}.{f.name}" not in DERIVED_KEYS)
        lines.append("")
    return "\n".join(lines)
