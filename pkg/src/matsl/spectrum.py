"""Forward spectral pipeline: characteristic matrix, eigenvalues, Weyl matrix, weights.

Eigenvalues are the zeros of det V2(phi(., lam)).  They are located through
the normalized characteristic matrix

    W(rho) = -(rho^-1 T2 + T2perp) V2(phi(., rho^2)) (T1 + rho T1perp),

which stays bounded and well conditioned on the real rho axis.  The scan
variable is s = sign(lam) sqrt|lam|, so negative eigenvalues (rho = i|s|)
are found on the same pass.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import ProblemL, SpectralDataSet, SpectralEntry, group_tolerance, hermitize, index_set
from .errors import GroupNotIsolated, MissedRootSuspicion, NearPole, NonRealResidual, NotPSD
from .propagator import phi_init, propagate_batch, psi_init
from .zerocase import roots_r

SCAN_STEP = 0.005
SMALL_RHO = 0.05
MULT_RTOL = 1e-6
NEWTON_TOL = 1e-13
NEWTON_MAXIT = 30
CONTOUR_NODES = 512
POLE_COND = 1e12
CHUNK = 4096


@dataclass(frozen=True)
class WeylSample:
    lam: complex
    M: np.ndarray


@dataclass(frozen=True)
class EigenvalueRecord:
    lam: float
    rho: complex
    multiplicity: int
    residual: float


def boundary_form_V2(Y, Y1, boundary) -> np.ndarray:
    """V2(Y) = T2 (Y^[1](pi) - H2 Y(pi)) - T2perp Y(pi); works on batches."""
    return boundary.T2 @ (Y1 - boundary.H2 @ Y) - boundary.T2perp @ Y


def boundary_form_V1(Y, Y1, boundary) -> np.ndarray:
    """V1(Y) = T1 (Y^[1](0) - H1 Y(0)) - T1perp Y(0)."""
    return boundary.T1 @ (Y1 - boundary.H1 @ Y) - boundary.T1perp @ Y


def boundary_form_V1perp(Y, Y1, boundary) -> np.ndarray:
    """V1perp(Y) = T1perp (Y^[1](0) - H1 Y(0)) + T1 Y(0)."""
    return boundary.T1perp @ (Y1 - boundary.H1 @ Y) + boundary.T1 @ Y


def _batched(fn, x, *args):
    """Apply ``fn`` to ``x`` in chunks to bound memory on long scans."""
    x = np.atleast_1d(x)
    if x.size <= CHUNK:
        return fn(x, *args)
    return np.concatenate([fn(x[i:i + CHUNK], *args) for i in range(0, x.size, CHUNK)])


def V2_phi(problem: ProblemL, lam, rescale: bool = False):
    """V2(phi(., lam)) for an array of lam; returns ``(V, log_scale)``."""
    Y0, Y10 = phi_init(problem)
    Y, Y1, ls = propagate_batch(problem.sigma, lam, 0.0, np.pi, Y0, Y10, rescale=rescale)
    return boundary_form_V2(Y, Y1, problem.boundary), ls


def _normalize(V, rho, b):
    """-(rho^-1 T2 + T2perp) V (T1 + rho T1perp) for batched rho."""
    r = rho[:, None, None]
    left = b.T2 / r + b.T2perp
    right = b.T1 + r * b.T1perp
    return -left @ V @ right


def charW(problem: ProblemL, rho) -> np.ndarray:
    """Normalized characteristic matrix W(rho) for rho != 0 (scalar or array)."""
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=complex))
    V, _ = V2_phi(problem, rho_arr ** 2)
    W = _normalize(V, rho_arr, problem.boundary)
    return W[0] if np.ndim(rho) == 0 else W


def _lam_of_s(s):
    s = np.asarray(s, dtype=float)
    return np.sign(s) * s * s


def _Wn_chunk(s, problem):
    """Scan matrix: charW for |s| >= SMALL_RHO (scaled by e^{-|s| pi} for s < 0),
    raw V2(phi) near lam = 0."""
    lam = _lam_of_s(s)
    V, ls = V2_phi(problem, lam, rescale=True)
    tau = np.maximum(-s, 0.0)
    V = V * np.exp(ls - tau * np.pi)[:, None, None]
    rho = np.where(s >= 0, s, 0.0) + 1j * tau
    big = np.abs(s) >= SMALL_RHO
    out = V.astype(complex)
    if np.any(big):
        out[big] = _normalize(V[big], rho[big], problem.boundary)
    return out


def _Wn(problem, s):
    return _batched(_Wn_chunk, np.asarray(s, dtype=float), problem)


def _smin(W) -> np.ndarray:
    return np.linalg.svd(W, compute_uv=False)[..., -1]


def _mult(W, scale: float) -> int:
    sv = np.linalg.svd(W, compute_uv=False)
    return int(np.sum(sv <= MULT_RTOL * scale))


# -- root refinement ------------------------------------------------------------

def _mat_near(problem, x, small: bool):
    """Matrix function used for Newton refinement at the real point(s) x.

    ``small`` selects the lam-variable branch (V2(phi(lam)), entire in lam);
    otherwise the s-variable scan matrix is used.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if small:
        V, ls = V2_phi(problem, x, rescale=True)
        return V * np.exp(ls)[:, None, None]
    return _Wn(problem, x)


def _pencil_steps(problem, x0: float, small: bool) -> np.ndarray:
    h = 1e-5 * (1.0 + abs(x0))
    F, Fp, Fm = _mat_near(problem, [x0, x0 + h, x0 - h], small)
    dF = (Fp - Fm) / (2 * h)
    # linearization F + d dF = 0: generalized eigenvalues of (F, -dF)
    a, b = scipy.linalg.eigvals(F, -dF, homogeneous_eigvals=True)
    ok = np.abs(b) > 1e-14 * np.maximum(np.abs(a), 1.0)
    return a[ok] / b[ok]


def _newton(problem, x: float, small: bool, radius: float):
    """Pencil Newton from x, confined to |x - x_start| <= radius.

    Returns ``(root, imaginary part of the last step)`` or None on escape.
    """
    im = 0.0
    x_start = x
    for _ in range(NEWTON_MAXIT):
        d = _pencil_steps(problem, x, small)
        if d.size == 0:
            break
        step = d[np.argmin(np.abs(d))]
        im = abs(step.imag)
        x = x + step.real
        if abs(x - x_start) > radius:
            return None
        if abs(step) < NEWTON_TOL * (1.0 + abs(x)):
            break
    return x, im


def _candidates(problem, s0: float, radius: float) -> list[tuple[float, bool]]:
    """Real roots of the scan matrix reachable from the grid minimum s0."""
    out = []
    small = abs(s0) < SMALL_RHO
    x0 = _lam_of_s(s0) if small else s0
    d = _pencil_steps(problem, float(x0), small)
    rad = radius * (2 * max(abs(s0), radius) if small else 1.0)
    starts = [float(x0 + z.real) for z in d if abs(z) < rad]
    for st in starts:
        res = _newton(problem, st, small, 2 * rad)
        if res is None:
            continue
        x, im = res
        if im > 1e-9 * (1.0 + abs(x)):
            warnings.warn(f"root near {x:.6g} keeps imaginary part {im:.2e}", NonRealResidual)
        lam = x if small else float(_lam_of_s(x))
        out.append(lam)
    return out


def _s_of_lam(lam: float) -> float:
    return float(np.sign(lam) * np.sqrt(abs(lam)))


def _neg_bound(problem: ProblemL) -> float:
    b = problem.boundary
    h = np.linalg.norm(b.H1, 2) + np.linalg.norm(b.H2, 2)
    return 1.0 + 2.0 * (2.0 * problem.sigma.sup_norm() + h)


def _grid_roots(problem: ProblemL, s_lo: float, s_hi: float, step: float) -> list[float]:
    n = int(np.ceil((s_hi - s_lo) / step)) + 3
    grid = s_lo - step + step * np.arange(n)
    vals = _smin(_Wn(problem, grid))
    mins = [i for i in range(1, n - 1) if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]]
    lams: list[float] = []
    for i in mins:
        for lam in _candidates(problem, float(grid[i]), 1.5 * step):
            s = _s_of_lam(lam)
            if s_lo <= s <= s_hi:
                lams.append(lam)
    return lams


def _scan(problem: ProblemL, s_lo: float, s_hi: float, step: float,
          found: list[float] | None = None) -> tuple[list[EigenvalueRecord], list[float]]:
    """Roots from one grid pass, pooled with roots ``found`` by earlier passes."""
    lams = sorted((found or []) + _grid_roots(problem, s_lo, s_hi, step))
    # merge repeated hits of the same root, then keep genuine zeros only
    merged: list[list[float]] = []
    for lam in lams:
        if merged and abs(lam - merged[-1][-1]) < group_tolerance(lam):
            merged[-1].append(lam)
        else:
            merged.append([lam])
    records = []
    for cl in merged:
        lam = float(np.mean(cl))
        s = _s_of_lam(lam)
        small = abs(s) < SMALL_RHO
        x = lam if small else s
        W = _mat_near(problem, [x], small)[0]
        # s_max at the root itself is blind for m = 1; take the scale nearby
        off = 0.25 * (1.0 + abs(x)) if small else 0.25
        around = _mat_near(problem, [x - off, x + off], small)
        scale = max(np.linalg.norm(W, 2), *(np.linalg.norm(a, 2) for a in around))
        mult = _mult(W, scale)
        if mult == 0:
            continue
        distinct = 1 + int(np.sum(np.diff(cl) > 1e-9 * (1.0 + abs(lam))))
        rho = np.sqrt(complex(lam)) if lam < 0 else np.sqrt(lam)
        records.append(EigenvalueRecord(lam, rho, max(mult, distinct), float(_smin(W) / scale)))
    return records, lams


def _expected_count(r: np.ndarray, p_perp: int, cut: float) -> int:
    """#{(n,k) in J : n + r_k < cut}."""
    total = 0
    for k, rk in enumerate(r, start=1):
        n0 = 1 if k <= p_perp else 0
        n_top = int(np.ceil(cut - rk)) - 1  # largest n with n + rk < cut
        total += max(0, n_top - n0 + 1)
    return total


def _gap_cut(r: np.ndarray, at_least: float) -> float:
    """Smallest n + g >= at_least where g is the midpoint of the widest circular gap of r."""
    rs = np.sort(np.asarray(r, dtype=float))
    ext = np.append(rs, rs[0] + 1.0)
    j = int(np.argmax(np.diff(ext)))
    g = 0.5 * (ext[j] + ext[j + 1]) % 1.0
    return float(np.ceil(at_least - g) + g)


def _counted_scan(problem: ProblemL, lo: float, hi: float, cut: float, expected: int,
                  step: float, check: bool = True) -> list[EigenvalueRecord]:
    """Scan [lo, hi] until the roots below cut match the expected count."""
    found: list[float] = []
    got = -1
    # nearly coincident roots can share one grid minimum; finer grids add to
    # what the coarser ones found
    for st in (step, step / 5, step / 25):
        recs, found = _scan(problem, lo, hi, st, found)
        got = sum(e.multiplicity for e in recs if e.lam < cut * cut)
        if not check or got == expected:
            return recs
    raise MissedRootSuspicion(f"found {got} eigenvalues below rho={cut:.4f}, expected {expected}")


def locate_eigenvalues(problem: ProblemL, rho_max: float, step: float = SCAN_STEP,
                       check: bool = True) -> list[EigenvalueRecord]:
    """Eigenvalues with sqrt(lam) in [0, rho_max] plus all negative ones, ascending.

    The scan runs up to a cut placed in a gap of the limiting pattern n + r_k,
    so the number of roots found can be compared against the index set.
    """
    if rho_max <= 0:
        raise ValueError("rho_max must be positive")
    r = roots_r(problem.boundary)
    cut = _gap_cut(r, rho_max)
    expected = _expected_count(r, problem.p_perp, cut)
    lo = -_neg_bound(problem)
    recs = _counted_scan(problem, lo, cut, cut, expected, step, check)
    return [e for e in recs if e.lam <= rho_max * rho_max]


# -- Weyl matrix and weights -------------------------------------------------------

def _weyl_chunk(lam, problem):
    b = problem.boundary
    p0, p1 = phi_init(problem)
    q0, q1 = psi_init(problem)
    Y0 = np.hstack([p0, q0])
    Y10 = np.hstack([p1, q1])
    Y, Y1, _ = propagate_batch(problem.sigma, lam, 0.0, np.pi, Y0, Y10, rescale=True)
    V = boundary_form_V2(Y, Y1, b)
    m = b.m
    return np.concatenate([V[..., :m], V[..., m:]], axis=-1)


def weyl_batch(problem: ProblemL, lam, check: bool = False) -> np.ndarray:
    """M(lam) = -V2(phi)^-1 V2(psi) for an array of lam, shape (B, m, m)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    V = _batched(_weyl_chunk, lam, problem)
    m = problem.m
    Vp, Vq = V[..., :m], V[..., m:]
    if check:
        # conditioning of V2(phi) measured against the whole row [V2(phi) V2(psi)],
        # so that a scalar V2(phi) near zero also counts as a pole
        smin = np.linalg.svd(Vp, compute_uv=False)[..., -1]
        c = np.linalg.norm(V, 2, axis=(-2, -1)) / np.maximum(smin, 1e-300)
        if np.any(~np.isfinite(c)) or np.any(c > POLE_COND):
            raise NearPole(f"V2(phi) conditioning {np.max(c):.2e} exceeds {POLE_COND:.0e}")
    return -np.linalg.solve(Vp, Vq)


def weyl(problem: ProblemL, lam: complex) -> WeylSample:
    """Weyl matrix at a single point off the spectrum."""
    M = weyl_batch(problem, [lam], check=True)[0]
    return WeylSample(complex(lam), M)


def weight_matrix(problem: ProblemL, lam: float, gap: float,
                  nodes: int = CONTOUR_NODES) -> np.ndarray:
    """Residue of M at the eigenvalue group centred at ``lam``.

    ``gap`` is the distance to the nearest eigenvalue outside the group; the
    contour radius is gap / 3.5 so the next pole is well outside.
    """
    R = gap / 3.5
    if not np.isfinite(R) or R < 1e-9 * (1.0 + abs(lam)):
        raise GroupNotIsolated(f"group at {lam:.6g} has a neighbour at distance {gap:.2e}")
    z = R * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    M = weyl_batch(problem, lam + z)
    a = hermitize(np.mean(M * z[:, None, None], axis=0))
    w = np.linalg.eigvalsh(a)
    if w[0] < -1e-8 * max(abs(w[-1]), 1e-300):
        raise NotPSD(f"weight at {lam:.6g} has eigenvalue {w[0]:.3e}")
    return a


def _gaps(lams: list[float]) -> list[float]:
    out = []
    for i, l in enumerate(lams):
        d = [abs(l - lams[j]) for j in (i - 1, i + 1) if 0 <= j < len(lams)]
        out.append(min(d) if d else np.inf)
    return out


def spectral_data(problem: ProblemL, n_max: int, threads: int = 1,
                  step: float = SCAN_STEP) -> SpectralDataSet:
    """Eigenvalues and weight matrices for all (n, k) in J with n <= n_max."""
    b = problem.boundary
    r = roots_r(b)
    cut = _gap_cut(r, n_max + r[-1] + 1e-9)
    # scan one unit past the cut so the top group also has an upper neighbour
    lo = -_neg_bound(problem)
    expected = _expected_count(r, problem.p_perp, cut)
    recs = _counted_scan(problem, lo, cut + 1.0, cut, expected, step)
    lams = [e.lam for e in recs]
    gaps = _gaps(lams)
    idx, _, _ = index_set(b, n_max)
    # expand by multiplicity and pair with J in ascending order
    flat = [(i, e) for i, e in enumerate(recs) if e.lam < cut * cut for _ in range(e.multiplicity)]
    flat = flat[:len(idx)]
    need = sorted({i for i, _ in flat})

    def work(i):
        return i, weight_matrix(problem, lams[i], gaps[i])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            weights = dict(ex.map(work, need))
    else:
        weights = dict(map(work, need))
    entries = [
        SpectralEntry(j.n, j.k, e.lam, weights[i], e.multiplicity)
        for j, (i, e) in zip(idx, flat)
    ]
    return SpectralDataSet(b.m, entries)
