"""Canonical JSON / CSV emission for reports and path objects."""

from __future__ import annotations

import csv
import io
import json
import os


def canonical_json(doc) -> str:
    """Deterministic rendering: sorted keys, repr-exact floats, newline-terminated."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, doc):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_csv(header, rows))


def path_csv_rows(times, values):
    """Fixed path schema: t followed by the flattened value components."""
    rows = []
    for t, v in zip(times, values):
        flat = v.reshape(-1)
        rows.append([repr(float(t))] + [repr(float(x)) for x in flat])
    return rows


def path_csv_header(values):
    width = values[0].reshape(-1).size
    return ["t"] + [f"value_{i}" for i in range(width)]
