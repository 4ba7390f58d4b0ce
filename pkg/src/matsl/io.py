"""JSON and CSV files for problems, spectral data and recovered projectors.

Matrices are written row-major with complex entries as [re, im]; readers
also accept real entries and flat lists of length m*m.  Floats are written
with 17 significant digits so that files round-trip exactly and repeated
runs give byte-identical output.
"""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .core import ProblemL, SpectralDataSet, SpectralEntry, make_problem
from .errors import ShapeError


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with fixed 17-digit floats; lists of numbers stay on one line."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        if all(not isinstance(v, dict) for v in obj) and _level > 1:
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _entry(z) -> complex:
    if isinstance(z, (list, tuple)):
        if len(z) != 2:
            raise ShapeError(f"complex entry must be [re, im], got {z!r}")
        return complex(float(z[0]), float(z[1]))
    return complex(float(z))


def _is_number(z) -> bool:
    if isinstance(z, list):
        return len(z) == 2 and all(isinstance(u, (int, float)) for u in z)
    return isinstance(z, (int, float))


def matrix_from_json(obj, m: int | None = None) -> np.ndarray:
    """Row-major matrix from nested lists; entries real or [re, im]."""
    if isinstance(obj, (int, float)):
        obj = [[obj]]
    n = len(obj)
    flat = all(not isinstance(z, list) for z in obj) or (
        m is not None and n == m * m and all(_is_number(z) for z in obj))
    if flat:
        k = int(round(math.sqrt(n)))
        if k * k != n:
            raise ShapeError(f"flat matrix of length {n} is not square")
        obj = [obj[i * k:(i + 1) * k] for i in range(k)]
    a = np.array([[_entry(z) for z in row] for row in obj], dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got shape {a.shape}")
    if m is not None and a.shape[0] != m:
        raise ShapeError(f"matrix must be {m}x{m}, got {a.shape}")
    return a


# -- problem ------------------------------------------------------------------------

def problem_to_dict(problem: ProblemL) -> dict:
    b = problem.boundary
    return {
        "m": b.m,
        "N": problem.sigma.N,
        "sigma": [matrix_to_json(c) for c in problem.sigma.cells],
        "T1": matrix_to_json(b.T1),
        "T2": matrix_to_json(b.T2),
        "H1": matrix_to_json(b.H1),
        "H2": matrix_to_json(b.H2),
    }


def problem_from_dict(d: dict) -> ProblemL:
    try:
        m = int(d["m"])
        T1 = matrix_from_json(d["T1"], m)
        T2 = matrix_from_json(d["T2"], m)
    except KeyError as exc:
        raise ShapeError(f"problem file lacks field {exc}") from exc
    H1 = matrix_from_json(d["H1"], m) if d.get("H1") is not None else None
    H2 = matrix_from_json(d["H2"], m) if d.get("H2") is not None else None
    sig = d.get("sigma")
    if sig is None or len(sig) == 0:
        cells = np.zeros((int(d.get("N", 1)), m, m), complex)
    else:
        cells = np.array([matrix_from_json(c, m) for c in sig])
        if "N" in d and int(d["N"]) != cells.shape[0]:
            raise ShapeError(f"N={d['N']} but {cells.shape[0]} sigma cells given")
    return make_problem(cells, T1, T2, H1, H2)


# -- spectral data --------------------------------------------------------------------

def data_to_dict(data: SpectralDataSet) -> dict:
    return {
        "m": data.m,
        "entries": [
            {"n": e.n, "k": e.k, "lambda": float(e.lam), "multiplicity": int(e.multiplicity),
             "alpha": matrix_to_json(e.alpha)}
            for e in data
        ],
    }


def data_from_dict(d: dict) -> SpectralDataSet:
    try:
        m = int(d["m"])
        entries = [SpectralEntry(int(e["n"]), int(e["k"]), float(e["lambda"]),
                                 matrix_from_json(e["alpha"], m), int(e.get("multiplicity", 1)))
                   for e in d["entries"]]
    except KeyError as exc:
        raise ShapeError(f"spectral-data file lacks field {exc}") from exc
    return SpectralDataSet(m, entries)


def data_to_csv(data: SpectralDataSet) -> str:
    """Flat table n, k, lambda, mult, then alpha entries (row-major re, im)."""
    m = data.m
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "lambda", "mult"]
               + [f"{p}_{i + 1}{j + 1}" for i in range(m) for j in range(m) for p in ("re", "im")])
    for e in data:
        vals = [_fmt(f(z)) for z in np.asarray(e.alpha).ravel() for f in (np.real, np.imag)]
        w.writerow([e.n, e.k, _fmt(e.lam), e.multiplicity] + vals)
    return buf.getvalue()


def projectors_to_dict(rec) -> dict:
    return {
        "T1": matrix_to_json(rec.T1),
        "T2": matrix_to_json(rec.T2),
        "snap_distance": float(rec.snap_distance),
        "rho_star": float(rec.rho_star),
        "r": [float(q) for q in rec.limits.r],
    }


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def write_json(obj: dict, path=None) -> str:
    text = dumps(obj) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
