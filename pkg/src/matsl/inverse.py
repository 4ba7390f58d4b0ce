"""Recovery of the boundary projectors T1, T2 from spectral data.

The Weyl matrix is rebuilt from the data as a regularized series

    M(lam) = sum_{(n,k)} (1/(lam - lam_nk) + beta(lam_nk)) alpha'_nk + C,
    beta(lam) = lam / (lam^2 + omega^2),

where C is a constant matrix.  T1 follows from the growth of the weights,
and T2 from the characteristic matrix of the zero problem built on the
limits (r_k, A_k) of the data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .asymptotics import Limits, _circ, _taper_fit, extract_r_A
from .core import (
    ProblemL,
    SpectralDataSet,
    hermitize,
    make_problem,
    numerical_rank,
    snap_to_projector,
    validate_boundary,
)
from .errors import BadDiamond, NoConvergence, PoleHit, RhoStarUnusable, SingularCombination
from .zerocase import A_residues, roots_r, spectral_data_from_limits

POLE_TOL = 1e-12
ZERO_N = 4096
ROMBERG_LEVELS = 6
TAU_PAIR = (3.5, 4.5)
RHO_STAR = 0.26
RHO_STAR_SHIFT = 0.07
RHO_STAR_CLEARANCE = 0.05
T2_RANK_RTOL = 0.03
C0_TOL = 1e-2  # (r, A) estimated from finite data are only approximately consistent
REFINE_A_WEIGHT = 0.3


@dataclass(frozen=True)
class WeylSeriesConfig:
    omega: float = 1.0
    n_max: int | None = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.n_max is not None and self.n_max < 8:
            raise ValueError("series truncation n_max must be at least 8")


def _beta(lam, omega):
    return lam / (lam * lam + omega * omega)


def _series_arrays(data: SpectralDataSet, n_max: int | None):
    ap = data.alpha_prime()
    keep = [i for i, e in enumerate(data.entries) if n_max is None or e.n <= n_max]
    lams = np.array([data.entries[i].lam for i in keep])
    alphas = np.array([ap[i] for i in keep]).reshape(len(keep), data.m, data.m)
    return lams, alphas


def _partial_sum(data: SpectralDataSet, omega: float, lam, n_max: int | None) -> np.ndarray:
    lams, alphas = _series_arrays(data, n_max)
    lam_arr = np.asarray(lam, dtype=complex)
    d = lam_arr[..., None] - lams
    if np.any(np.abs(d) <= POLE_TOL * (1.0 + np.abs(lam_arr[..., None]))):
        raise PoleHit(f"lam={lam} coincides with an eigenvalue in the data")
    c = 1.0 / d + _beta(lams, omega)
    return np.einsum("...j,jab->...ab", c, alphas)


def weyl_series(data: SpectralDataSet, config: WeylSeriesConfig, lam) -> np.ndarray:
    """Truncated series over alpha' for n <= config.n_max (all data if None).

    ``lam`` may be a scalar or an array; the result has shape (..., m, m).
    """
    return _partial_sum(data, config.omega, lam, config.n_max)


def weyl_series_accelerated(data: SpectralDataSet, config: WeylSeriesConfig, lam,
                            levels: int | None = None) -> np.ndarray:
    """Romberg extrapolation of the truncated series over N, N/2, N/4, ...

    Assumes the truncation error expands in powers of 1/N, which holds for
    data of the zero problem (smooth, non-oscillating terms).
    """
    levels = levels or ROMBERG_LEVELS
    N = config.n_max if config.n_max is not None else data.n_max
    Ns = [N >> j for j in range(levels - 1, -1, -1)]
    if Ns[0] < 1:
        raise NoConvergence(f"n_max={N} too small for {levels} Romberg levels")
    table = [_partial_sum(data, config.omega, lam, n) for n in Ns]
    for j in range(1, levels):
        f = 2.0 ** j
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
    return table[0]


def C0_star(zero_data: SpectralDataSet, config: WeylSeriesConfig, T1: np.ndarray,
            taus=TAU_PAIR) -> np.ndarray:
    """Constant of the zero-problem Weyl series.

    For the zero problem M0(-tau^2) = tau T1perp - tau^-1 T1 up to terms of
    order e^{-2 pi tau}, so C0 = tau T1perp - tau^-1 T1 - series(-tau^2) is
    evaluated at two values of tau and required to agree.
    """
    m = T1.shape[0]
    T1p = np.eye(m) - T1
    vals = []
    for tau in taus:
        S = weyl_series_accelerated(zero_data, config, -tau * tau)
        vals.append(tau * T1p - T1 / tau - S)
    diff = np.max(np.abs(vals[1] - vals[0]))
    if diff > C0_TOL * (1.0 + np.max(np.abs(vals[1]))):
        raise NoConvergence(f"C0 estimates at tau={taus} differ by {diff:.2e}")
    return hermitize(vals[-1])


T1_FIT_TOL = 1e-2


def _T1perp_fit(sums: dict[int, np.ndarray], N: int) -> np.ndarray:
    """Tapered fit in 1/n of degree 2, falling back to degree 1 for rough data.

    Zero-problem sums are exactly quadratic in 1/n, but with a strong sigma
    the quadratic fit is unsteady at small n.  Estimates from the top window
    and from the window ending at 3N/4 are compared; degree 1 is used when
    degree 2 disagrees by more than T1_FIT_TOL and degree 1 agrees better.
    Disagreement above 0.05 raises NoConvergence.
    """
    q = 3 * N // 4
    fits = []
    for degree in (2, 1):
        est = hermitize(_taper_fit(sums, N, degree=degree))
        low = hermitize(_taper_fit({n: v for n, v in sums.items() if n <= q}, q, degree=degree))
        fits.append((est, float(np.max(np.abs(est - low)))))
    est, diff = fits[0]
    if diff > T1_FIT_TOL and fits[1][1] < diff:
        est, diff = fits[1]
    if diff > 0.05:
        raise NoConvergence(f"T1perp estimates from successive windows differ by {diff:.3f}")
    return est


def recover_T1(data: SpectralDataSet):
    """T1perp from (pi/2) n^-2 sum_k alpha'_nk, T1 = I - T1perp.

    The normalized sums are an exact quadratic in 1/n for zero-problem data,
    so the limit is taken by a tapered quadratic fit in 1/n.  Returns
    ``(T1, T1perp, snap_distance)``.
    """
    N = data.n_max
    if N < 16:
        raise NoConvergence(f"n_max={N} is below 16")
    ap = data.alpha_prime()
    m = data.m
    sums: dict[int, np.ndarray] = {}
    for n, pos in data.by_n().items():
        if n >= 1 and len(pos) == m:
            sums[n] = (np.pi / 2) * sum(ap[i] for i in pos) / (n * n)
    est = _T1perp_fit(sums, N)
    T1p, dist, ok = snap_to_projector(est)
    if not ok:
        raise NoConvergence(f"T1perp estimate is {dist:.3f} away from a projector")
    return np.eye(m) - T1p, T1p, dist


def solve_AB(E: np.ndarray, t: float):
    """Canonical solution (A, B) = (E + tI, I - tE) of (tA + B)^-1 (A - tB) = E."""
    E = np.asarray(E, dtype=complex)
    m = E.shape[0]
    I = np.eye(m)
    if abs(1.0 + t * t) < 1e-12:
        raise SingularCombination(f"t={t}: tA + B = (1 + t^2) I is singular")
    A = E + t * I
    B = I - t * E
    res = np.linalg.solve(t * A + B, A - t * B) - E
    if np.max(np.abs(res)) > 1e-10 * (1.0 + np.max(np.abs(E))):
        raise SingularCombination(f"identity residual {np.max(np.abs(res)):.2e}")
    return A, B


def choose_rho_star(r, start: float = RHO_STAR) -> float:
    """First rho* = start + j*0.07 in (0, 1) at distance >= 0.05 from every n + r_k."""
    r = np.asarray(r, dtype=float)
    rho = start
    while rho < 1.0:
        d = np.abs(rho - r) % 1.0
        if np.all(np.minimum(d, 1.0 - d) >= RHO_STAR_CLEARANCE):
            return rho
        rho += RHO_STAR_SHIFT
    raise RhoStarUnusable(f"no admissible rho* in (0, 1) for r={r}")


def _p_perp_from_limits(r, A_pairs, T1) -> int:
    for q, A in A_pairs:
        if abs(q) < 1e-12:
            return numerical_rank(A, 1e-6) - numerical_rank(T1 @ A @ T1, 1e-6)
    return 0


def zero_data_from_limits(r, A_pairs, T1, n_max: int = ZERO_N) -> SpectralDataSet:
    return spectral_data_from_limits(r, A_pairs, T1, n_max, _p_perp_from_limits(r, A_pairs, T1))


def zero_E(r, A_pairs, T1, rho_star: float, config: WeylSeriesConfig | None = None) -> np.ndarray:
    """E0(rho*) = (T1 + rho*^-1 T1perp) M0(rho*^2) (rho* T1 + T1perp), M0 from the series."""
    config = config or WeylSeriesConfig(n_max=ZERO_N)
    sd0 = zero_data_from_limits(r, A_pairs, T1, config.n_max or ZERO_N)
    C = C0_star(sd0, config, T1)
    M0 = weyl_series_accelerated(sd0, config, rho_star ** 2) + C
    T1p = np.eye(T1.shape[0]) - T1
    return (T1 + T1p / rho_star) @ M0 @ (rho_star * T1 + T1p)


def recover_T2(r, A_pairs, T1: np.ndarray, config: WeylSeriesConfig | None = None,
               rho_star: float | None = None):
    """T2 = projector onto Ran D*^dagger, D* = (E0 + tI) T1 + (t E0 - I) T1perp, t = tan(rho* pi).

    Returns ``(T2, rho_star)``.
    """
    if rho_star is None:
        rho_star = choose_rho_star(r)
    E = zero_E(r, A_pairs, T1, rho_star, config)
    t = float(np.tan(np.pi * rho_star))
    A, B = solve_AB(E, t)
    T1p = np.eye(T1.shape[0]) - T1
    D = A @ T1 - B @ T1p
    # rank cut relative to the size of the ingredients, not of D itself:
    # D vanishes identically when T2 = 0
    U, sv, _ = np.linalg.svd(D.conj().T)
    scale = (1.0 + abs(t)) * (1.0 + np.linalg.norm(E, 2))
    k = int(np.sum(sv > T2_RANK_RTOL * scale))
    Uk = U[:, :k]
    return hermitize(Uk @ Uk.conj().T), rho_star


def _projector_from(x: np.ndarray, m: int, k: int) -> np.ndarray:
    X = (x[:m * k] + 1j * x[m * k:]).reshape(m, k)
    Q, _ = np.linalg.qr(X)
    return hermitize(Q @ Q.conj().T)


def refine_T2(T2: np.ndarray, r, A_pairs, T1: np.ndarray) -> np.ndarray:
    """Least-squares polish of T2 against the estimated limits.

    T2 = Q Q^dagger with Q from an m x k matrix is varied so that the zero
    problem (T1, T2) reproduces r (mod 1) and, with a smaller weight, the
    A_k.  The r are far better determined by finite data than the A_k,
    which is what the direct recovery of T2 is most sensitive to.
    """
    m = T1.shape[0]
    k = int(round(np.trace(T2).real))
    if k in (0, m):
        return T2
    r = np.asarray(r, dtype=float)

    def residual(x):
        b = validate_boundary(T1, _projector_from(x, m, k))
        rr = roots_r(b)
        out = [np.min(np.abs(_circ(rr - q))) for q in r]
        model = A_residues(b, rr)
        for q, A in A_pairs:
            Am = min(model, key=lambda qa: abs(_circ(qa[0] - q)))[1]
            out.extend(REFINE_A_WEIGHT * (Am - A).view(float).ravel())
        return np.array(out)

    V = np.linalg.eigh(T2)[1][:, -k:]
    x0 = np.r_[V.real.ravel(), V.imag.ravel()]
    try:
        sol = least_squares(residual, x0)
    except (np.linalg.LinAlgError, ValueError):
        return T2
    if not sol.success or sol.cost > 0.5 * float(np.sum(residual(x0) ** 2)):
        return T2
    return _projector_from(sol.x, m, k)


@dataclass
class RecoveredProjectors:
    T1: np.ndarray
    T2: np.ndarray
    snap_distance: float
    rho_star: float
    limits: Limits


def algorithm_T12(data: SpectralDataSet, config: WeylSeriesConfig | None = None) -> RecoveredProjectors:
    """T1 from the weight growth, (r_k, A_k) from the asymptotics, then T2."""
    T1, _, d1 = recover_T1(data)
    lim = extract_r_A(data, T1)
    T2, rho = recover_T2(lim.r, lim.A, T1, config)
    T2 = refine_T2(T2, lim.r, lim.A, T1)
    return RecoveredProjectors(T1, T2, max(d1, lim.snap_distance), rho, lim)


def apply_transform(problem: ProblemL, H1_diamond) -> ProblemL:
    """Problem with equal spectral data: sigma - H, same T1, T2, H2 + T2 H T2.

    H must be Hermitian with H = T1perp H T1perp.
    """
    b = problem.boundary
    H = np.asarray(H1_diamond, dtype=complex)
    if H.shape != (b.m, b.m):
        raise BadDiamond(f"H1 diamond has shape {H.shape}, expected {(b.m, b.m)}")
    scale = 1e-10 * max(1.0, np.max(np.abs(H)))
    if np.max(np.abs(H - H.conj().T)) > scale:
        raise BadDiamond("H1 diamond is not Hermitian")
    if np.max(np.abs(H - b.T1perp @ H @ b.T1perp)) > scale:
        raise BadDiamond("H1 diamond must satisfy H = T1perp H T1perp")
    cells = problem.sigma.cells - H
    return make_problem(cells, b.T1, b.T2, b.H1, b.H2 + b.T2 @ H @ b.T2)
