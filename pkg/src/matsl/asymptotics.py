"""Asymptotic diagnostics and extraction of the limit objects (r_k, A_k).

For large n the data behave like

    rho_nk = n + r_k + kappa_nk,
    alpha_n^(k) = (2/pi) (T1 + rho T1perp) (A_k + K_nk) (T1 + rho T1perp),

with square-summable kappa and K.  Square summability cannot be decided
from finitely many terms, so the reports carry partial sums and a Cauchy
tail test: the sum over n in (N, 2N] must not exceed the sum over (N/2, N].
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import SpectralDataSet, hermitize
from .errors import NoConvergence

R_CLUSTER = 0.05
R_CLUSTER_MIN = 4e-3
SNAP_WINDOW = 0.3
MAX_DRIFT = 0.05
FIT_DEGREE = 1
TAPER_FLOOR = 1e-3


@dataclass
class Limits:
    """Estimated r_k (length m, ascending) and A per distinct r."""

    r: np.ndarray
    A: list  # (r, A) pairs, A a projector
    r_spread: float = 0.0
    snap_distance: float = 0.0
    raw: np.ndarray | None = None  # unsnapped estimates indexed by k

    def A_for(self, r: float) -> np.ndarray:
        return min(self.A, key=lambda qa: abs(qa[0] - r))[1]

    def A_by_k(self) -> list[np.ndarray]:
        return [self.A_for(q) for q in self.r]


def _normalizer(rho: float, T1: np.ndarray) -> np.ndarray:
    """(T1 + rho^-1 T1perp), the inverse of the weight scaling factor."""
    return T1 + (np.eye(T1.shape[0]) - T1) / rho


def _taper_fit(vals: dict[int, np.ndarray | float], n_top: int, degree: int = FIT_DEGREE):
    """Limit of v(n) from a fit c0 + c1/n + ... over n in [n_top/4, n_top].

    The remainders oscillate in n (with period set by the jumps of sigma)
    on top of a smooth 1/n decay.  A Hann taper on the least-squares weights
    suppresses the oscillating part, which plain extrapolation from v(n),
    v(2n) would pick up at full size.
    """
    ns = np.array([n for n in sorted(vals) if n_top / 4 <= n <= n_top], dtype=float)
    if ns.size < degree + 3:
        raise NoConvergence(f"not enough data for the limit fit (n_max={n_top})")
    t = (ns - ns[0]) / (ns[-1] - ns[0])
    w = np.sqrt(np.sin(np.pi * t) ** 2 + TAPER_FLOOR)
    V = np.vander(1.0 / ns, degree + 1, increasing=True) * w[:, None]
    first = np.asarray(vals[int(ns[0])])
    Y = np.array([np.asarray(vals[int(n)]).ravel() for n in ns]) * w[:, None]
    coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
    return coef[0].reshape(first.shape) if first.ndim else float(coef[0, 0])


def _real_rho(lam: float) -> float:
    return float(np.sign(lam) * np.sqrt(abs(lam)))


def _r_estimates(data: SpectralDataSet, n_top: int) -> np.ndarray:
    per_k: dict[int, dict[int, float]] = {}
    for e in data:
        if 1 <= e.n <= n_top:
            per_k.setdefault(e.k, {})[e.n] = _real_rho(e.lam) - e.n
    return np.array([float(_taper_fit(per_k[k], n_top)) for k in range(1, data.m + 1)])


def _clusters(r: np.ndarray, tol: float = R_CLUSTER) -> list[list[int]]:
    out: list[list[int]] = []
    for k in np.argsort(r, kind="stable"):
        if out and r[k] - r[out[-1][-1]] < tol:
            out[-1].append(int(k))
        else:
            out.append([int(k)])
    # wrap-around: values just below 1 belong with values near 0
    if len(out) > 1 and r[out[0][0]] + 1.0 - r[out[-1][-1]] < tol:
        out[0] = out.pop() + out[0]
    return out


def _A_estimates(data: SpectralDataSet, T1: np.ndarray, ks: list[int], n_top: int) -> np.ndarray:
    group_of = {}
    for gi, g in enumerate(data.groups):
        for i in g:
            group_of[i] = gi
    vals: dict[int, np.ndarray] = {}
    for n, pos in data.by_n().items():
        if n < 1 or n > n_top:
            continue
        seen = set()
        acc = np.zeros((data.m, data.m), complex)
        for i in pos:
            e = data.entries[i]
            if e.k - 1 not in ks or group_of[i] in seen:
                continue
            seen.add(group_of[i])
            L = _normalizer(_real_rho(e.lam), T1)
            acc += L @ e.alpha @ L
        vals[n] = acc * (np.pi / 2)
    return hermitize(_taper_fit(vals, n_top))


def _snap(a: np.ndarray) -> tuple[np.ndarray, float]:
    w, v = np.linalg.eigh(hermitize(a))
    target = np.round(np.clip(w, 0.0, 1.0))
    dist = float(np.max(np.abs(w - target), initial=0.0))
    if dist > SNAP_WINDOW:
        raise NoConvergence(f"A estimate has eigenvalue {w[np.argmax(np.abs(w - target))]:.3f}, not near 0 or 1")
    keep = v[:, target > 0.5]
    return keep @ keep.conj().T, dist


def _circ(x):
    """Signed circular offset in (-0.5, 0.5]."""
    return -((0.5 - np.asarray(x)) % 1.0) + 0.5


def _symmetrize(centres: list[float], sizes: list[int], tol: float = R_CLUSTER) -> list[float]:
    """Impose the symmetry r -> -r (mod 1) of the limiting pattern.

    Clusters near the fixed points 0 and 1/2 are put on them; every other
    cluster is averaged with its mirror partner of equal size, if present.
    """
    out = list(centres)
    for i, c in enumerate(centres):
        if abs(_circ(c)) < tol:
            out[i] = 0.0
        elif abs(_circ(c - 0.5)) < tol:
            out[i] = 0.5
        else:
            j = min(range(len(centres)), key=lambda q: abs(_circ(centres[q] + c)))
            if j != i and sizes[j] == sizes[i] and abs(_circ(centres[j] + c)) < tol:
                out[i] = (c + (c - _circ(c + centres[j]))) / 2.0 % 1.0
    return out


def _extract(data: SpectralDataSet, T1: np.ndarray, n_top: int, raw: np.ndarray, tol: float):
    clusters = _clusters(raw, tol)
    centres = [float(np.angle(np.mean(np.exp(2j * np.pi * raw[cl]))) / (2 * np.pi)) % 1.0
               for cl in clusters]
    centres = _symmetrize(centres, [len(cl) for cl in clusters], tol)
    r = raw.copy()
    pairs = []
    dist = 0.0
    for cl, c in zip(clusters, centres):
        r[cl] = c
        A, d = _snap(_A_estimates(data, T1, cl, n_top))
        dist = max(dist, d)
        pairs.append((c, A))
    order = np.argsort(r, kind="stable")
    spread = float(np.max(np.abs(_circ(raw - r)), initial=0.0))
    return Limits(r[order], sorted(pairs, key=lambda qa: qa[0]), spread, dist, raw)


def extract_r_A(data: SpectralDataSet, T1: np.ndarray) -> Limits:
    """Estimate r_k and the projectors A_k from finite data (n_max >= 16).

    Estimates from the top window and from the window ending at 3 n_max / 4
    must agree within 0.05, otherwise NoConvergence is raised.  Their difference also sets the
    distance below which two r_k are taken as one multiple root.
    """
    n_top = data.n_max
    if n_top < 16:
        raise NoConvergence(f"n_max={n_top} is below 16")
    full = _r_estimates(data, n_top)
    drift = float(np.max(np.abs(_circ(full - _r_estimates(data, 3 * n_top // 4)))))
    if drift > MAX_DRIFT:
        raise NoConvergence(f"r estimates drift by {drift:.3f} between successive windows")
    tol = min(max(4.0 * drift, R_CLUSTER_MIN), R_CLUSTER)
    return _extract(data, T1, n_top, full, tol)


# -- reports ------------------------------------------------------------------------

def _tail_test(per_n: dict[int, float], n_top: int) -> tuple[bool, float, float]:
    N = n_top // 2
    upper = sum(v for n, v in per_n.items() if N < n <= 2 * N)
    lower = sum(v for n, v in per_n.items() if N // 2 < n <= N)
    # allow rounding noise when both sums are at machine level
    return upper <= lower + 1e-20, upper, lower


@dataclass
class TailReport:
    rows: list = field(default_factory=list)  # (n, k, value)
    cumulative: dict = field(default_factory=dict)  # n -> partial sum of squares
    passed: bool = True
    upper_tail: float = 0.0
    lower_tail: float = 0.0


def _tail_report(rows, n_top: int) -> TailReport:
    per_n: dict[int, float] = {}
    for n, _, v in rows:
        per_n[n] = per_n.get(n, 0.0) + float(v) ** 2
    cum, s = {}, 0.0
    for n in sorted(per_n):
        s += per_n[n]
        cum[n] = s
    ok, up, lo = _tail_test(per_n, n_top)
    return TailReport(rows, cum, ok, up, lo)


def kappa_report(data: SpectralDataSet, r) -> TailReport:
    """kappa_nk = rho_nk - n - r_k with partial sums of squares and the tail test."""
    r = np.asarray(r, dtype=float)
    rows = [(e.n, e.k, _real_rho(e.lam) - e.n - r[e.k - 1]) for e in data]
    return _tail_report(rows, data.n_max)


def _k_clusters(A_by_k: list[np.ndarray], r=None) -> list[list[int]]:
    """0-based k indices sharing one limit (equal r, or else equal A)."""
    out: list[list[int]] = []
    for k in range(len(A_by_k)):
        if out:
            j = out[-1][0]
            same = abs(r[k] - r[j]) < 1e-12 if r is not None else np.allclose(A_by_k[k], A_by_k[j])
            if same:
                out[-1].append(k)
                continue
        out.append([k])
    return out


def weight_gap_report(data: SpectralDataSet, A, T1: np.ndarray, r=None) -> TailReport:
    """Norms of K_n^(k) = (pi/2) sum L alpha' L - A_k, L = (T1 + rho^-1 T1perp).

    The sum runs over the distinct eigenvalue groups of the indices (n, s)
    with r_s = r_k, so split clusters are compared with their common limit.
    ``A`` is either a :class:`Limits` or a list of m matrices indexed by k;
    rows are reported at the first k of each cluster.  Entries with rho = 0
    (where L is undefined) are skipped.
    """
    if isinstance(A, Limits):
        A_by_k, r = A.A_by_k(), A.r
    else:
        A_by_k = list(A)
    clusters = _k_clusters(A_by_k, r)
    group_of = {i: gi for gi, g in enumerate(data.groups) for i in g}
    rows = []
    for n, pos in sorted(data.by_n().items()):
        for cl in clusters:
            acc = np.zeros((data.m, data.m), complex)
            seen, hit, skip = set(), False, False
            for i in pos:
                e = data.entries[i]
                if e.k - 1 not in cl:
                    continue
                hit = True
                rho = _real_rho(e.lam)
                if abs(rho) < 1e-8:
                    skip = True
                    break
                if group_of[i] in seen:
                    continue
                seen.add(group_of[i])
                L = _normalizer(rho, T1)
                acc += L @ e.alpha @ L
            if not hit or skip or not all(j + 1 in {data.entries[i].k for i in pos} for j in cl):
                continue
            K = (np.pi / 2) * acc - A_by_k[cl[0]]
            rows.append((n, cl[0] + 1, float(np.linalg.norm(K, 2))))
    return _tail_report(rows, data.n_max)


@dataclass
class AsymptoticsReport:
    limits: Limits
    kappa: TailReport
    K: TailReport

    def rows(self):
        knorm = {(n, k): v for n, k, v in self.K.rows}
        out = []
        for n, k, kap in self.kappa.rows:
            rho = n + self.limits.r[k - 1] + kap
            out.append((n, k, rho, kap, knorm.get((n, k), float("nan"))))
        return out

    def to_json(self) -> str:
        return json.dumps({
            "r": [float(x) for x in self.limits.r],
            "r_spread": self.limits.r_spread,
            "A_snap_distance": self.limits.snap_distance,
            "kappa_tail_pass": self.kappa.passed,
            "K_tail_pass": self.K.passed,
            "kappa_tails": [self.kappa.lower_tail, self.kappa.upper_tail],
            "K_tails": [self.K.lower_tail, self.K.upper_tail],
            "rows": [dict(zip(("n", "k", "rho", "kappa", "Knorm"), row)) for row in self.rows()],
        }, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "k", "rho", "kappa", "Knorm"])
        for n, k, rho, kap, kn in self.rows():
            w.writerow([n, k, repr(float(rho)), repr(float(kap)), repr(float(kn))])
        return buf.getvalue()


def asymptotics_report(data: SpectralDataSet, T1: np.ndarray) -> AsymptoticsReport:
    lim = extract_r_A(data, T1)
    return AsymptoticsReport(lim, kappa_report(data, lim.r), weight_gap_report(data, lim, T1))
