"""Flat key=value report files: fit results, metrics, run provenance."""

from __future__ import annotations

from pathlib import Path


def write_report(path, entries: dict) -> None:
    """Write a dict as ``key=value`` lines (floats with full precision)."""
    lines = []
    for key, value in entries.items():
        if isinstance(value, float):
            lines.append(f"{key}={value:.17g}")
        else:
            lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict[str, str]:
    """Read a key=value report back as a string dict; '#' starts comments."""
    entries: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: expected key=value, got {raw!r}")
        entries[key.strip()] = value.strip()
    return entries
