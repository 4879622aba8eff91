"""CSV/JSON readers and writers for point sets, weights, designs and reports.

Floats are written with 17 significant digits so that every value
round-trips exactly.  Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .measures import AdmissibleWeight
from .poly_basis import PointSet


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def _json(obj) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return _json(obj) + "\n"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, csv_text(header, rows))


# --- point sets ------------------------------------------------------------

def point_header(d: int) -> list[str]:
    return [f"{part}_{k}" for k in range(1, d + 1) for part in ("re", "im")]


def write_points_csv(path, points: PointSet) -> Path:
    rows = []
    for p in points.points:
        row = []
        for z in p:
            row += [float(z.real), float(z.imag)]
        rows.append(row)
    return write_csv(path, point_header(points.d), rows)


def read_points_csv(path, label: str | None = None) -> PointSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        d = len(header) // 2
        if len(header) % 2 or header != point_header(d):
            raise ValueError(f"{path}: header must be re_1,im_1,...,re_d,im_d; got {header}")
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no points")
    pts = data[:, 0::2] + 1j * data[:, 1::2]
    return PointSet(pts, label=label or Path(path).stem)


def read_weight_csv(path, size: int | None = None) -> AdmissibleWeight:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "phi" not in [f.strip() for f in reader.fieldnames]:
            raise ValueError(f"{path}: missing 'phi' column")
        phi = [float(row["phi"]) for row in reader]
    if size is not None and len(phi) != size:
        raise ValueError(f"{path}: {len(phi)} phi values for {size} candidates")
    return AdmissibleWeight(np.array(phi), label=f"custom({Path(path).name})")


# --- results ---------------------------------------------------------------

def design_record(result) -> dict:
    supp = result.support_indices
    return {
        "n": result.n,
        "weights": [float(v) for v in result.weights[supp]],
        "support_indices": [int(i) for i in supp],
        "kw_gap": float(result.kw_gap),
        "log_det": float(result.log_det),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
    }


def write_design(directory, result, stem: str | None = None) -> list[Path]:
    stem = stem or f"design_n{result.n}"
    directory = Path(directory)
    js = write_json(directory / f"{stem}.json", design_record(result))
    tr = write_csv(directory / f"{stem}_trace.csv", ["iteration", "log_det", "kw_gap"],
                   [(int(i), float(ld), float(g)) for i, ld, g in result.trace])
    return [js, tr]


def write_family(directory, family, stem: str | None = None) -> list[Path]:
    stem = stem or f"{family.kind}_n{family.n}"
    directory = Path(directory)
    pts = write_points_csv(directory / f"{stem}.csv", family.points)
    sidecar = {
        "kind": family.kind,
        "n": family.n,
        "log_weighted_vdm": float(family.log_weighted_vdm),
        "indices": list(family.indices),
    }
    if family.increments:
        sidecar["log_increments"] = [float(v) for v in family.increments]
    js = write_json(directory / f"{stem}.json", sidecar)
    return [pts, js]


def write_plot_data(path, xs, ys) -> Path:
    return atomic_write(path, "".join(f"{int(x)} {fmt(y)}\n" for x, y in zip(xs, ys)))
