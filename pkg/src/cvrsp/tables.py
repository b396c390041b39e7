"""CSV tables with a '#'-prefixed header block."""

from __future__ import annotations

import csv
import io
import math
import os

from . import __version__
from .exceptions import DataError


def format_value(v) -> str:
    if hasattr(v, "dtype"):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    return str(v)


def header_block(command: str, config_sha256: str, seed: int, extra=None):
    meta = {"tool": f"cvrsp {__version__}", "command": command, "config_sha256": config_sha256, "seed": seed}
    meta.update(extra or {})
    return meta


def write_table(path, meta: dict, columns, rows) -> None:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_table(path, numeric: bool = True):
    """Return ``(meta, columns, rows)``; data errors name the file line."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    meta, columns, rows = {}, None, []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        fields = next(csv.reader([line]))
        if columns is None:
            columns = [f.strip() for f in fields]
            continue
        if len(fields) != len(columns):
            raise DataError(f"{path}: row at line {lineno} has {len(fields)} fields, expected {len(columns)}")
        if numeric:
            try:
                fields = [float(f) for f in fields]
            except ValueError as exc:
                raise DataError(f"{path}: row at line {lineno} is not numeric: {line!r}") from exc
            if not all(math.isfinite(f) for f in fields):
                raise DataError(f"{path}: row at line {lineno} contains a non-finite value")
        rows.append(fields)
    if columns is None:
        raise DataError(f"{path}: no column header found")
    return meta, columns, rows
