"""Command-line entry point ``matsl``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.  Errors are
reported on stderr as ``<ErrorName>: message``.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import io as mio
from .asymptotics import asymptotics_report
from .basis import build_Y, eigenfunction_family, frame_bounds
from .core import SpectralDataSet
from .errors import NumericalError, ValidationError
from .graphs import bipartite_normalize, general_reduction, load_graph
from .inverse import algorithm_T12, recover_T1
from .spectrum import spectral_data, weyl
from .verify import (
    Check,
    hermitian_residual,
    psd_rank_residual,
    sym1_residual,
    val_residual,
    weyl_symmetry_residual,
    wronskian_drift,
)
from .zerocase import zero_spectral_data


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _emit_data(data: SpectralDataSet, args):
    if args.csv:
        _emit(mio.data_to_csv(data), args.out)
    else:
        _emit(mio.write_json(mio.data_to_dict(data)), args.out)


def _load_problem(path):
    return mio.problem_from_dict(mio.read_json(path))


def _load_data(path):
    return mio.data_from_dict(mio.read_json(path))


def cmd_spectrum(args):
    problem = _load_problem(args.problem)
    _emit_data(spectral_data(problem, args.nmax, threads=args.threads), args)


def cmd_zerocase(args):
    problem = _load_problem(args.problem)
    if not problem.is_zero_case:
        warnings.warn("sigma, H1 and H2 are ignored by the closed-form zero case", stacklevel=1)
    _emit_data(zero_spectral_data(problem.boundary, args.nmax), args)


def cmd_weyl(args):
    problem = _load_problem(args.problem)
    parts = [float(v) for v in args.lam.split(",")]
    if len(parts) not in (1, 2):
        raise ValidationError("--lambda expects 'a' or 'a,b' for a + ib")
    lam = complex(parts[0], parts[1] if len(parts) == 2 else 0.0)
    M = weyl(problem, lam).M
    _emit(mio.write_json({"lambda": [lam.real, lam.imag], "M": mio.matrix_to_json(M)}), args.out)


def cmd_recover(args):
    rec = algorithm_T12(_load_data(args.data))
    _emit(mio.write_json(mio.projectors_to_dict(rec)), args.out)


def cmd_graph_reduce(args):
    g = bipartite_normalize(load_graph(args.graph))
    problem = general_reduction(g)
    d = mio.problem_to_dict(problem)
    d["rescale"] = g.scale
    d["edges"] = [[str(e.v0), str(e.v1)] for e in g.edges]
    _emit(mio.write_json(d), args.out)


ASYMPTOTIC_NMAX = 32


def verify_checks(problem, n_max: int, threads: int = 1) -> list[Check]:
    data = spectral_data(problem, n_max, threads=threads)
    rng = np.random.default_rng(0)
    lams = rng.normal(0, 5, 5) + 1j * rng.normal(0, 1, 5)
    small = data.truncated(min(n_max, 6))
    checks = [
        Check("wronskian drift", max(wronskian_drift(problem, z) for z in lams), 1e-10),
        Check("V2(phi) alpha", val_residual(problem, small), 1e-6),
        Check("orthogonality sym1", sym1_residual(problem, small), 1e-6),
        Check("weights PSD and rank", psd_rank_residual(data), 1e-8),
        Check("weights Hermitian", hermitian_residual(data), 1e-12),
        Check("Weyl symmetry", weyl_symmetry_residual(problem), 1e-8),
    ]
    # the tail tests need the limits fitted over n well beyond the roughness of sigma
    if n_max >= ASYMPTOTIC_NMAX:
        rep = asymptotics_report(data, recover_T1(data)[0])
        checks.append(Check("kappa tail", 0.0 if rep.kappa.passed else 1.0, 0.5))
        checks.append(Check("K tail", 0.0 if rep.K.passed else 1.0, 0.5))
        checks.append(Check("limit snap distance", rep.limits.snap_distance, 5e-2))
    fam = eigenfunction_family(problem, data)
    lo, hi = frame_bounds(fam)
    checks.append(Check("frame lower bound > 0", 0.0 if lo > 0 else 1.0, 0.5))
    checks.append(Check("frame upper bound <= pi + 0.1", max(0.0, hi - np.pi - 0.1), 1e-12))
    return checks


def cmd_verify(args):
    checks = verify_checks(_load_problem(args.problem), args.nmax, args.threads)
    lines = [c.line() for c in checks]
    ok = all(c.passed for c in checks)
    lines.append(f"{'PASS' if ok else 'FAIL'} overall: max residual {max(c.residual for c in checks):.3e}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 2


def cmd_basis(args):
    data = _load_data(args.data)
    if args.problem:
        T1 = _load_problem(args.problem).boundary.T1
    else:
        T1 = recover_T1(data)[0]
    fam = build_Y(data.truncated(args.N), T1, args.grid)
    lo, hi = frame_bounds(fam)
    _emit(mio.write_json({"N": args.N, "grid": args.grid, "gram_min": lo, "gram_max": hi}), args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matsl", description="Matrix Sturm-Liouville spectral tools")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        p.set_defaults(fn=fn)
        return p

    p = add("spectrum", cmd_spectrum, "forward spectral data")
    p.add_argument("problem")
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--csv", action="store_true")

    p = add("zerocase", cmd_zerocase, "closed-form data of the zero problem")
    p.add_argument("problem")
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--csv", action="store_true")

    p = add("weyl", cmd_weyl, "Weyl matrix at one point")
    p.add_argument("problem")
    p.add_argument("--lambda", dest="lam", required=True, help="a or a,b for a + ib")

    p = add("recover", cmd_recover, "recover T1, T2 from spectral data")
    p.add_argument("data")

    p = add("graph-reduce", cmd_graph_reduce, "reduce a graph problem to a matrix problem")
    p.add_argument("graph")

    p = add("verify", cmd_verify, "run the invariant checks")
    p.add_argument("problem")
    p.add_argument("--nmax", type=int, default=8)

    p = add("basis", cmd_basis, "frame bounds of the vector family")
    p.add_argument("data")
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--grid", type=int, default=2048)
    p.add_argument("--problem", default=None, help="take T1 from this problem file")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = args.fn(args)
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
