"""Flat ``key = value`` config files shared by the data generator and the trainer."""

import configparser
import dataclasses
import types
import typing
from pathlib import Path

_SECTION = "foldit"


class ConfigError(ValueError):
    pass


def read_flat(path):
    """Read a sectionless ``key = value`` file into a dict of strings."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return dict(parser[_SECTION])


def _coerce(raw, tp, key):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if raw.strip().lower() in ("", "none"):
            return None
        return _coerce(raw, args[0], key)
    if origin is tuple:
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        inner = typing.get_args(tp)
        return tuple(_coerce(p, inner[min(i, len(inner) - 1)], key) for i, p in enumerate(parts))
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
    return raw.strip()


def from_mapping(cls, values):
    """Build dataclass ``cls`` from string values; unknown keys are an error."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {k: _coerce(str(v), hints[k], k) if isinstance(v, str) else v for k, v in values.items()}
    return cls(**kwargs)


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_flat(obj, path=None):
    """Serialise a dataclass to flat ``key = value`` text (and optionally write it)."""
    lines = [f"{f.name} = {_format(getattr(obj, f.name))}" for f in dataclasses.fields(obj)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
