"""Closed-form spectral theory for sigma = 0, H1 = H2 = 0.

Everything here depends only on the projector pair (T1, T2): the
characteristic matrices W0, U0, the roots r_k of det W0 on [0, 1), the
residue projectors A_k and the resulting spectral data.  It serves as the
reference against which the numerical pipeline is checked.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BoundaryData,
    SpectralDataSet,
    SpectralEntry,
    hermitize,
    index_set,
)
from .errors import ContourTooClose, RootCountMismatch

SCAN_STEP = 1e-3
GOLDEN_TOL = 1e-12
KERNEL_RTOL = 1e-7
RESIDUE_NODES = 256
MERGE_TOL = 1e-9


def _pencil(b: BoundaryData):
    T1, T2, T1p, T2p = b.T1, b.T2, b.T1perp, b.T2perp
    diag = T2 @ T1 + T2p @ T1p
    off_w = T2p @ T1 - T2 @ T1p
    return diag, off_w


def W0_eval(rho, boundary: BoundaryData) -> np.ndarray:
    """W0(rho) = (T2T1 + T2'T1') sin(rho pi) + (T2'T1 - T2T1') cos(rho pi).

    ``rho`` may be a scalar or an array; array input gives shape (..., m, m).
    """
    diag, off_w = _pencil(boundary)
    z = np.asarray(rho, dtype=complex)[..., None, None] * np.pi
    return diag * np.sin(z) + off_w * np.cos(z)


def U0_eval(rho, boundary: BoundaryData) -> np.ndarray:
    """U0(rho) = (T2T1 + T2'T1') cos(rho pi) + (T2T1' - T2'T1) sin(rho pi)."""
    diag, off_w = _pencil(boundary)
    z = np.asarray(rho, dtype=complex)[..., None, None] * np.pi
    return diag * np.cos(z) - off_w * np.sin(z)


def E0_eval(rho, boundary: BoundaryData) -> np.ndarray:
    return np.linalg.solve(W0_eval(rho, boundary), U0_eval(rho, boundary))


def w0_eval(rho, boundary: BoundaryData):
    return np.linalg.det(W0_eval(rho, boundary))


def _smin(rho, boundary):
    s = np.linalg.svd(W0_eval(rho, boundary), compute_uv=False)
    return s[..., -1]


def _golden(f, a: float, b: float, tol: float = GOLDEN_TOL) -> float:
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _kernel_dim(mat: np.ndarray, rtol: float, scale: float) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s <= rtol * scale))


def _scan_roots(boundary: BoundaryData, step: float):
    m = boundary.m
    diag, off_w = _pencil(boundary)
    # |W0| is bounded by this on the real axis; the scale of s_max away from roots
    scale = max(np.linalg.norm(diag, 2), np.linalg.norm(off_w, 2))
    # one extra point on each side so a root at 0 is an interior minimum
    grid = np.arange(-2, int(round(1.0 / step)) + 2) * step
    vals = _smin(grid, boundary)
    found: list[tuple[float, int]] = []
    for i in range(1, grid.size - 1):
        if not (vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]):
            continue
        rho = _golden(lambda t: float(_smin(t, boundary)), grid[i - 1], grid[i + 1])
        W = W0_eval(rho, boundary)
        mult = _kernel_dim(W, KERNEL_RTOL, scale)
        if mult == 0:
            continue
        r = rho % 1.0
        if r > 1.0 - MERGE_TOL or r < MERGE_TOL:
            r = 0.0
        if any(abs(r - q) < MERGE_TOL for q, _ in found):
            continue
        found.append((r, mult))
    total = sum(k for _, k in found)
    return sorted(found), total == m


def roots_r(boundary: BoundaryData) -> np.ndarray:
    """The m zeros of det W0 on [0, 1), sorted, repeated by multiplicity."""
    found, ok = _scan_roots(boundary, SCAN_STEP)
    if not ok:
        found, ok = _scan_roots(boundary, SCAN_STEP / 10)
    if not ok:
        got = sum(k for _, k in found)
        raise RootCountMismatch(f"found {got} roots of w0 on [0,1) counting multiplicity, expected {boundary.m}")
    return np.array([r for r, k in found for _ in range(k)])


def _circular_gap(r: float, others) -> float:
    gap = 1.0
    for q in others:
        d = abs(r - q) % 1.0
        gap = min(gap, d, 1.0 - d)
    return gap


def A_residues(boundary: BoundaryData, roots: np.ndarray | None = None):
    """Residue projectors A_k = pi Res_{rho=r_k} E0(rho), one per distinct root.

    Returns a list of ``(r, A)`` pairs in increasing r.
    """
    if roots is None:
        roots = roots_r(boundary)
    distinct = sorted(set(float(r) for r in roots))
    theta = 2.0 * np.pi * np.arange(RESIDUE_NODES) / RESIDUE_NODES
    out = []
    for r in distinct:
        gap = _circular_gap(r, [q for q in distinct if q != r])
        delta = min(gap, 0.5) / 3.0
        if delta < 1e-4:
            raise ContourTooClose(f"root {r} has a neighbour within {3 * delta:.2e}")
        z = delta * np.exp(1j * theta)
        E = E0_eval(r + z, boundary)
        res = np.mean(E * z[:, None, None], axis=0)
        out.append((r, hermitize(np.pi * res)))
    return out


@dataclass(frozen=True, eq=False)
class ZeroCaseModel:
    m: int
    r: np.ndarray
    A: list
    p: int
    p_perp: int

    def A_for(self, r: float) -> np.ndarray:
        for q, a in self.A:
            if abs(q - r) < MERGE_TOL:
                return a
        raise KeyError(r)

    @property
    def distinct_r(self) -> list[float]:
        return [q for q, _ in self.A]


def zero_model(boundary: BoundaryData) -> ZeroCaseModel:
    r = roots_r(boundary)
    return ZeroCaseModel(boundary.m, r, A_residues(boundary, r), boundary.p, boundary.p_perp)


def zero_weight(rho: float, A: np.ndarray, T1: np.ndarray) -> np.ndarray:
    """Weight matrix of the zero problem at rho = n + r_k."""
    if rho == 0.0:
        return hermitize(T1 @ A @ T1) / np.pi
    T = T1 + rho * (np.eye(T1.shape[0]) - T1)
    return hermitize(T @ A @ T) * (2.0 / np.pi)


def spectral_data_from_limits(r, A_pairs, T1: np.ndarray, n_max: int, p_perp: int) -> SpectralDataSet:
    """Build zero-problem data from (r_k, A_k): rho = n + r_k, weights in closed form."""
    m = T1.shape[0]
    r = np.asarray(r, dtype=float)
    mats = {float(q): a for q, a in A_pairs}

    def lookup(q):
        key = min(mats, key=lambda s: abs(s - q))
        return mats[key]

    entries = []
    for n in range(0, n_max + 1):
        for k in range(1, m + 1):
            if n == 0 and k <= p_perp:
                continue
            rk = float(r[k - 1])
            rho = n + rk
            entries.append(SpectralEntry(n, k, rho * rho, zero_weight(rho, lookup(rk), T1)))
    data = SpectralDataSet(m, entries)
    for g in data.groups:
        for i in g:
            data.entries[i].multiplicity = len(g)
    return data


def zero_spectral_data(boundary: BoundaryData, n_max: int, model: ZeroCaseModel | None = None) -> SpectralDataSet:
    """Closed-form spectral data over J truncated at n <= n_max."""
    if model is None:
        model = zero_model(boundary)
    data = spectral_data_from_limits(model.r, model.A, boundary.T1, n_max, boundary.p_perp)
    expected, _, _ = index_set(boundary, n_max)
    assert [e.index for e in data] == expected
    return data


def roots_r_pencil(boundary: BoundaryData) -> np.ndarray:
    """Roots of det W0 via the generalized eigenproblem in t = tan(rho pi).

    Independent of the scan in :func:`roots_r`; used as a cross-check.
    """
    import scipy.linalg

    diag, off_w = _pencil(boundary)
    # W0 = cos(rho pi) (diag t + off_w); roots solve off_w v = -t diag v
    t = scipy.linalg.eigvals(off_w, -diag, homogeneous_eigvals=True)
    alpha, beta = t
    out = []
    for a, b in zip(alpha, beta):
        if abs(b) < 1e-12 * max(abs(a), 1.0):
            out.append(0.5)
        else:
            out.append((np.arctan((a / b).real) / np.pi) % 1.0)
    out = np.array([0.0 if (x > 1 - MERGE_TOL or x < MERGE_TOL) else x for x in out])
    return np.sort(out)
