"""CSV datasets, result tables and run manifests."""

import csv
from datetime import datetime, timezone
import json
import math

import numpy as np

from .exceptions import FidelityPlannerError
from .gp import Fidelity, FidelityDataset


class DatasetFormatError(FidelityPlannerError, ValueError):
    """A dataset CSV does not follow the ``x1,...,xd,y`` schema."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt(value):
    """Serialize a cell: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return "" if value is None else str(value)


def read_dataset(path, fidelity=Fidelity.HIGH):
    """Read a ``x1,...,xd,y`` CSV file into a :class:`FidelityDataset`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("file is empty", 1) from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        expected = [f"x{i + 1}" for i in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise DatasetFormatError(f"header must be {','.join(expected) or 'x1,...,xd,y'}", 1)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d + 1:
                raise DatasetFormatError(f"expected {d + 1} fields, got {len(row)}", line_no)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DatasetFormatError(str(exc), line_no) from None
            if not all(math.isfinite(v) for v in vals):
                raise DatasetFormatError("non-finite value", line_no)
            rows.append(vals)
    if not rows:
        raise DatasetFormatError("no data rows", 2)
    arr = np.array(rows)
    try:
        return FidelityDataset(arr[:, :d], arr[:, d], fidelity)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None


def write_table(path_or_file, header, rows):
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def write_dataset(path, data):
    header = [f"x{i + 1}" for i in range(data.d)] + ["y"]
    write_table(path, header, np.column_stack([data.points, data.values]).tolist())


def write_points(path, points):
    points = np.atleast_2d(points)
    write_table(path, [f"x{i + 1}" for i in range(points.shape[1])], points.tolist())


def manifest(command, parameters, master_seed, version):
    return {
        "command": command,
        "parameters": parameters,
        "master_seed": master_seed,
        "tool_version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_manifest(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        data = json.load(fh)
    for key in ("command", "parameters", "master_seed"):
        if key not in data:
            raise ValueError(f"manifest lacks {key!r}")
    return data
