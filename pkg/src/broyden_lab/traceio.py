"""CSV traces with a JSON metadata sidecar.

Floats are written with 17 significant digits so a read-back is exact;
unavailable fields are empty cells.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from .solver import CSV_FIELDS, IterationRecord

_INT_FIELDS = {"k", "direction_index"}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def trace_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_cell(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def _parse(name, s):
    if s == "":
        return None
    return int(s) if name in _INT_FIELDS else float(s)


def records_from_csv(text):
    rows = csv.reader(io.StringIO(text))
    header = next(rows)
    if tuple(header) != CSV_FIELDS:
        raise ValueError(f"unexpected trace header {header}")
    return [IterationRecord(**{f: _parse(f, s) for f, s in zip(CSV_FIELDS, row)}) for row in rows if row]


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def write_trace(trace, csv_path):
    """Write ``trace.records`` to ``csv_path`` and metadata beside it."""
    atomic_write(csv_path, trace_to_csv(trace.records))
    atomic_write(sidecar_path(csv_path), json.dumps(trace.metadata, indent=2, sort_keys=True) + "\n")


def read_trace(csv_path):
    """Return ``(records, metadata)``; metadata is ``{}`` without a sidecar."""
    records = records_from_csv(Path(csv_path).read_text())
    side = sidecar_path(csv_path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return records, meta
