"""Flat key=value config files shared by the CLI and the data generator.

The format is deliberately plain so runs stay diffable: one ``key = value``
per line, ``#`` comments, blank lines ignored. Typing is applied by the
consumer against its known keys.
"""

from __future__ import annotations

from datetime import date, time


class ConfigError(Exception):
    """Invalid configuration: unknown key, bad value, missing input path."""


def parse_kv_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def coerce(key: str, text: str, kind: type):
    """Convert a raw config string to ``kind``, with readable failures."""
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is date:
            return date.fromisoformat(text)
        if kind is time:
            return time.fromisoformat(text)
        return kind(text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def parse_night_window(text: str) -> tuple[time, time]:
    """Parse ``18:00-08:00`` into a (start, end) pair of times."""
    try:
        start_text, _, end_text = text.partition("-")
        return time.fromisoformat(start_text.strip()), time.fromisoformat(end_text.strip())
    except ValueError as exc:
        raise ConfigError(f"night window {text!r}: {exc}") from exc
