"""CSV ingestion/emission and config-file loading for the command line."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .config import ConfigError


class DataError(ValueError):
    """Malformed or insufficient input data."""


def read_columns(path, columns: list[str]) -> dict[str, np.ndarray]:
    """Read numeric ``columns`` from a headered UTF-8 CSV.

    Empty cells and non-numeric values are rejected with their line number.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}; available: {header}")
        idx = [header.index(c) for c in columns]
        values: list[list[float]] = [[] for _ in columns]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            for out, j, name in zip(values, idx, columns):
                cell = row[j].strip() if j < len(row) else ""
                if not cell:
                    raise DataError(f"{path}:{lineno}: missing value in column {name!r}")
                try:
                    out.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {cell!r} in column {name!r}") from None
    arrays = {name: np.array(v, dtype=float) for name, v in zip(columns, values)}
    for name, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{path}: non-finite values in column {name!r}")
    return arrays


def write_csv(path, header: list[str], rows: np.ndarray) -> None:
    """Write rows with 17 significant digits so that floats round-trip exactly."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_config_file(path, section: str) -> dict:
    """Flat option values from a TOML file or a run manifest.

    TOML: top-level keys plus the keys of ``[section]``.  JSON manifests
    written by a previous run contribute their recorded ``config``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            manifest = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if manifest.get("subcommand") not in (None, section):
            raise ConfigError(f"{path} records a {manifest['subcommand']!r} run, not {section!r}")
        return dict(manifest.get("config", manifest))
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    flat.update(doc.get(section, {}))
    return flat
