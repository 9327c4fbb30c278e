"""Flat-file outputs: CSV with a JSON meta comment line, or JSON ``{meta, rows}``.

Floats are written with 17 significant digits so doubles round-trip.  Files
are written to a temporary sibling and moved into place with ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from typing import Any, Sequence

__all__ = ["META_PREFIX", "format_value", "render_csv", "render_json", "render", "write_atomic",
           "parse_output"]

META_PREFIX = "# meta: "


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


def _fieldnames(rows: Sequence[dict]) -> list[str]:
    names: list[str] = []
    for row in rows:
        for k in row:
            if k not in names:
                names.append(k)
    return names


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def render_csv(meta: dict, rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps(_json_safe(meta), sort_keys=True) + "\n")
    names = _fieldnames(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in rows:
        w.writerow([format_value(row.get(k)) for k in names])
    return buf.getvalue()


def render_json(meta: dict, rows: Sequence[dict]) -> str:
    return json.dumps({"meta": _json_safe(meta), "rows": _json_safe(list(rows))}, sort_keys=True, indent=1) + "\n"


def render(meta: dict, rows: Sequence[dict], fmt: str) -> str:
    if fmt == "csv":
        return render_csv(meta, rows)
    if fmt == "json":
        return render_json(meta, rows)
    raise ValueError(f"unknown format {fmt!r}")


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_output(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`render`; CSV cells come back as strings."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        return obj["meta"], obj["rows"]
    first, _, body = text.partition("\n")
    if not first.startswith(META_PREFIX):
        raise ValueError("missing meta header line")
    meta = json.loads(first[len(META_PREFIX):])
    rows = list(csv.DictReader(io.StringIO(body)))
    return meta, rows
