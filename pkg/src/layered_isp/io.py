"""CSV reading/writing shared by every data product.

Files are UTF-8, comma separated, with one ``#`` comment line carrying the
schema version, the product kind and free-form ``key=value`` metadata,
followed by a header row. Floats are written with 17 significant digits so a
write/read round trip is lossless.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from .errors import SchemaError

SCHEMA_VERSION = 1


def fmt(x):
    return format(float(x), ".17g")


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serialisable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def write_table(path, kind, header, rows, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(meta or {})
    tags = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# layered_isp schema={SCHEMA_VERSION} kind={kind} {tags}".rstrip() + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return path


def read_table(path, kind, header):
    """Read a table written by :func:`write_table`.

    Returns ``(meta, rows)`` where rows are lists of strings. Raises
    :class:`SchemaError` naming the offending line on any mismatch.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# layered_isp"):
        raise SchemaError(f"{path}: missing schema comment line", line=1)
    meta = {}
    for tok in lines[0][1:].split()[1:]:
        if "=" in tok:
            k, v = tok.split("=", 1)
            meta[k] = v
    if meta.get("schema") != str(SCHEMA_VERSION):
        raise SchemaError(f"{path}: unsupported schema {meta.get('schema')!r}", line=1)
    if meta.get("kind") != kind:
        raise SchemaError(f"{path}: expected kind {kind!r}, found {meta.get('kind')!r}", line=1)
    if len(lines) < 2:
        raise SchemaError(f"{path}: missing header row", line=2)
    got = next(csv.reader([lines[1]]))
    if got != list(header):
        raise SchemaError(f"{path}: header {got} does not match expected {list(header)}", line=2)
    rows = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        row = next(csv.reader([line]))
        if len(row) != len(header):
            raise SchemaError(f"{path}: expected {len(header)} fields, got {len(row)}", line=i)
        rows.append((i, row))
    return meta, rows


def parse_float(value, line, column):
    try:
        return float(value)
    except ValueError:
        raise SchemaError(f"column {column!r}: not a number: {value!r}", line=line) from None


def parse_int(value, line, column):
    try:
        return int(value)
    except ValueError:
        raise SchemaError(f"column {column!r}: not an integer: {value!r}", line=line) from None
