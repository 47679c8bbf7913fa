"""Flat ``key = value`` text configs mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path

from .errors import ConfigError, ParseError


def read_kv(path) -> dict:
    """Parse ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    return parse_kv(Path(path).read_text(), path=path)


def parse_kv(text: str, path=None) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise ParseError("expected 'key = value'", path=path, line=lineno)
        key = key.strip()
        if not key:
            raise ParseError("empty key", path=path, line=lineno)
        out[key] = value.strip()
    return out


def _coerce(value: str, tp, key):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and str(origin) == "types.UnionType"):
        if value.lower() in ("none", "null", ""):
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], key)
    if origin is tuple:
        parts = [p for p in value.replace(",", " ").split()]
        elem = args[0] if args else float
        return tuple(_coerce(p, elem, key) for p in parts)
    try:
        if tp is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if tp is int:
            return int(value)
        if tp is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for '{key}': {value!r}") from None
    return value


def from_kv(cls, mapping: dict, strict: bool = True):
    """Build dataclass ``cls`` from string values, converting by annotated type."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - names
    if unknown and strict:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {k: _coerce(v, hints[k], k) for k, v in mapping.items() if k in names}
    return cls(**kwargs)


def to_kv(obj) -> str:
    lines = []
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
