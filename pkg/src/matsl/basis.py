"""The vector sequence built from spectral data and its Riesz-basis diagnostics.

For every eigenvalue group the matrix B = (pi/2) T^-1 alpha T^-1 with
T = T1 + rho T1perp is a projector-like matrix whose range has dimension
equal to the multiplicity.  An orthonormal basis E of that range gives

    Y_nk(x) = (cos(rho x) T1 + sin(rho x) T1perp) E_nk     (rho != 0)
    Y_nk(x) = (T1 + x T1perp) E_nk                         (rho == 0)

Completeness cannot be checked numerically; instead the extreme eigenvalues
of the Gram matrix of growing truncations serve as frame bounds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .asymptotics import TailReport, _tail_report
from .core import ProblemL, SpectralDataSet, SpectralIndex
from .errors import IndexMismatch, RankMismatch
from .propagator import phi_init, sample_batch

B_RTOL = 1e-8
MIN_GRID = 1024


@dataclass
class BasisEntry:
    index: SpectralIndex
    E: np.ndarray  # unit m-vector
    samples: np.ndarray  # (K, m) values on the grid


@dataclass
class BasisFamily:
    entries: list[BasisEntry]
    x: np.ndarray

    @property
    def K(self) -> int:
        return self.x.size

    def indices(self) -> list[SpectralIndex]:
        return [e.index for e in self.entries]

    def truncated(self, n_max: int) -> "BasisFamily":
        return BasisFamily([e for e in self.entries if e.index.n <= n_max], self.x)

    def matrix(self) -> np.ndarray:
        """Samples stacked as (entries, K, m)."""
        return np.stack([e.samples for e in self.entries])


def _T(rho, T1: np.ndarray) -> np.ndarray:
    if rho == 0:
        return np.eye(T1.shape[0])
    return T1 + rho * (np.eye(T1.shape[0]) - T1)


def _is_zero(lam: float) -> bool:
    return abs(lam) < 1e-12


def _B(alpha: np.ndarray, rho, T1: np.ndarray) -> np.ndarray:
    Ti = np.linalg.inv(_T(rho, T1))
    # for non-real rho the conjugate transpose keeps B Hermitian
    return (np.pi / 2) * Ti @ alpha @ Ti.conj().T


def _fix_phase(v: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v)))
    return v * (abs(v[j]) / v[j])


def select_E(data: SpectralDataSet, T1) -> dict[SpectralIndex, np.ndarray]:
    """Orthonormal E_nk per eigenvalue group, in descending eigenvalue order of B."""
    T1 = np.asarray(T1, dtype=complex)
    out = {}
    for g in data.groups:
        e0 = data.entries[g[0]]
        rho = 0.0 if _is_zero(e0.lam) else e0.rho
        B = _B(e0.alpha, rho, T1)
        w, v = np.linalg.eigh(0.5 * (B + B.conj().T))
        keep = w > B_RTOL * max(np.max(np.abs(w)), 1e-300)
        if int(np.sum(keep)) != len(g):
            raise RankMismatch(
                f"group at lam={e0.lam:.6g} has {int(np.sum(keep))} eigenvectors, multiplicity {len(g)}")
        order = np.argsort(-w[keep], kind="stable")
        vecs = v[:, keep][:, order]
        for i, col in zip(g, vecs.T):
            out[data.entries[i].index] = _fix_phase(col)
    return out


def _grid(K: int) -> np.ndarray:
    if K < MIN_GRID:
        raise ValueError(f"grid size K={K} is below {MIN_GRID}")
    return np.linspace(0.0, np.pi, K)


def build_Y(data: SpectralDataSet, T1, K: int = 2048) -> BasisFamily:
    T1 = np.asarray(T1, dtype=complex)
    T1p = np.eye(T1.shape[0]) - T1
    x = _grid(K)
    E = select_E(data, T1)
    entries = []
    for e in data:
        v = E[e.index]
        if _is_zero(e.lam):
            vals = (T1 @ v)[None, :] + x[:, None] * (T1p @ v)[None, :]
        else:
            rx = e.rho * x
            vals = np.cos(rx)[:, None] * (T1 @ v) + np.sin(rx)[:, None] * (T1p @ v)
        entries.append(BasisEntry(e.index, v, vals))
    return BasisFamily(entries, x)


def eigenfunction_family(problem: ProblemL, data: SpectralDataSet, K: int = 2048) -> BasisFamily:
    """Samples of phi(x, lam_nk) T_nk E_nk on the same grid as build_Y."""
    T1 = problem.boundary.T1
    x = _grid(K)
    E = select_E(data, T1)
    Y0, Y10 = phi_init(problem)
    lams = np.array([e.lam for e in data])
    Y, _ = sample_batch(problem.sigma, lams, x, Y0, Y10)  # (B, K, m, m)
    entries = []
    for j, e in enumerate(data):
        rho = 0.0 if _is_zero(e.lam) else e.rho
        v = _T(rho, T1) @ E[e.index]
        entries.append(BasisEntry(e.index, E[e.index], Y[j] @ v))
    return BasisFamily(entries, x)


def _weights(x: np.ndarray) -> np.ndarray:
    w = np.full(x.size, x[1] - x[0])
    w[0] = w[-1] = 0.5 * (x[1] - x[0])
    return w


def gram(family: BasisFamily) -> np.ndarray:
    """Gram matrix (Y_i, Y_j) by the composite trapezoid rule."""
    F = family.matrix().reshape(len(family.entries), -1)
    w = np.repeat(_weights(family.x), family.entries[0].samples.shape[1])
    G = (F.conj() * w) @ F.T
    return 0.5 * (G + G.conj().T)


def frame_bounds(family: BasisFamily, N: int | None = None) -> tuple[float, float]:
    """Smallest and largest Gram eigenvalue of the family truncated at n <= N."""
    fam = family if N is None else family.truncated(N)
    w = np.linalg.eigvalsh(gram(fam))
    return float(w[0]), float(w[-1])


@dataclass
class ClosenessReport:
    total: float
    tail: TailReport


def quadratic_closeness(family: BasisFamily, reference: BasisFamily) -> ClosenessReport:
    """Sum of ||Y_nk - Y0_nk||^2 with per-n partial sums and the tail test."""
    if family.indices() != reference.indices():
        raise IndexMismatch("families have different index sets")
    if family.K != reference.K:
        raise IndexMismatch("families are sampled on different grids")
    w = _weights(family.x)
    rows = []
    for a, b in zip(family.entries, reference.entries):
        d = np.sum(np.abs(a.samples - b.samples) ** 2, axis=1)
        rows.append((a.index.n, a.index.k, float(np.sqrt(np.dot(w, d)))))
    n_top = max(i.n for i in family.indices())
    rep = _tail_report(rows, n_top)
    return ClosenessReport(float(sum(v * v for _, _, v in rows)), rep)


def family_to_csv(family: BasisFamily, index: SpectralIndex | tuple) -> str:
    """CSV with columns x, re_1, im_1, ..., re_m, im_m for one entry."""
    index = SpectralIndex(*index)
    for e in family.entries:
        if e.index == index:
            break
    else:
        raise IndexMismatch(f"no entry with index {tuple(index)}")
    m = e.samples.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["x"] + [f"{p}_{j + 1}" for j in range(m) for p in ("re", "im")])
    for x, row in zip(family.x, e.samples):
        w.writerow([repr(float(x))] + [repr(float(f(c))) for c in row for f in (np.real, np.imag)])
    return buf.getvalue()
