"""Cell-by-cell propagation of the quasi-derivative system.

On a cell where sigma equals the constant Hermitian matrix c the system

    Y' = c Y + Y1,    Y1' = -c Y1 - c^2 Y - lam Y

reduces to Y'' = -lam Y, so with D = Y' = Y1 + c Y the cell transfer is

    Y(x+h) = cos(rho h) Y + sin(rho h)/rho D
    D(x+h) = -rho sin(rho h) Y + cos(rho h) D
    Y1(x+h) = D(x+h) - c Y(x+h).

All three coefficients are entire in lam, so no branch of sqrt(lam) is
selected.  The transfer is exact for piecewise-constant sigma and is
applied to whole batches of spectral parameters at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemL, SigmaField
from .errors import ExpOverflow

DEFAULT_CAP = 50.0


@dataclass(frozen=True, eq=False)
class PropagatorState:
    """Solution pair (Y, Y^[1]) at position x.

    With rescaling enabled the true state is ``exp(log_scale) * (Y, Y1)``.
    Batched states carry a leading batch axis on Y, Y1 and log_scale.
    """

    x: float
    Y: np.ndarray
    Y1: np.ndarray
    log_scale: np.ndarray | float = 0.0

    def unscaled(self):
        f = np.exp(np.asarray(self.log_scale))[..., None, None]
        return self.Y * f, self.Y1 * f


def _coefficients(lam: np.ndarray, h: float):
    rho = np.sqrt(lam.astype(complex))
    z = rho * h
    cs = np.cos(z)
    sn = h * np.sinc(z / np.pi)  # sin(rho h)/rho, entire in lam
    return cs, sn, lam * sn


def _segments(sigma: SigmaField, a: float, b: float):
    """Yield (cell value, signed length) pieces covering a -> b."""
    if a == b:
        return
    edges = sigma.edges
    N = sigma.N
    lo, hi = min(a, b), max(a, b)
    pts = [lo] + [e for e in edges[1:-1] if lo < e < hi] + [hi]
    pieces = []
    for u, v in zip(pts[:-1], pts[1:]):
        i = min(max(int(0.5 * (u + v) / np.pi * N), 0), N - 1)
        pieces.append((sigma.cells[i], v - u))
    if b < a:
        pieces = [(c, -h) for c, h in reversed(pieces)]
    yield from pieces


def _im_rho_max(lam: np.ndarray) -> float:
    return float(np.max(np.abs(np.sqrt(lam.astype(complex)).imag), initial=0.0))


def propagate_batch(sigma: SigmaField, lam, a: float, b: float, Y, Y1,
                    rescale: bool = False, cap: float = DEFAULT_CAP):
    """Propagate batched states from x=a to x=b.

    ``lam`` has shape (B,); ``Y``/``Y1`` have shape (B, m, k) or (m, k)
    (broadcast to the batch).  Returns ``(Y, Y1, log_scale)``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    B = lam.shape[0]
    Y = np.broadcast_to(np.asarray(Y, dtype=complex), (B,) + np.shape(Y)[-2:]).copy()
    Y1 = np.broadcast_to(np.asarray(Y1, dtype=complex), (B,) + np.shape(Y1)[-2:]).copy()
    log_scale = np.zeros(B)
    if not rescale and _im_rho_max(lam) * abs(b - a) > cap:
        raise ExpOverflow(
            f"|Im sqrt(lam)| * length exceeds {cap}; propagate with rescale=True"
        )
    for c, h in _segments(sigma, a, b):
        cs, sn, lsn = _coefficients(lam, h)
        cs, sn, lsn = cs[:, None, None], sn[:, None, None], lsn[:, None, None]
        D = Y1 + c @ Y
        Yn = cs * Y + sn * D
        Dn = cs * D - lsn * Y
        Y, Y1 = Yn, Dn - c @ Yn
        if rescale:
            s = np.maximum(np.max(np.abs(Y), axis=(1, 2)), np.max(np.abs(Y1), axis=(1, 2)))
            s = np.where(s > 0, s, 1.0)
            Y /= s[:, None, None]
            Y1 /= s[:, None, None]
            log_scale += np.log(s)
    return Y, Y1, log_scale


def propagate(problem: ProblemL | SigmaField, lam, from_x: float, to_x: float,
              state: PropagatorState | tuple, rescale: bool = False,
              cap: float = DEFAULT_CAP) -> PropagatorState:
    """Propagate a single state (scalar ``lam``) between two positions."""
    sigma = problem.sigma if isinstance(problem, ProblemL) else problem
    if isinstance(state, PropagatorState):
        Y0, Y10, ls0 = state.Y, state.Y1, state.log_scale
    else:
        (Y0, Y10), ls0 = state, 0.0
    Y, Y1, ls = propagate_batch(sigma, [lam], from_x, to_x, Y0, Y10, rescale, cap)
    return PropagatorState(to_x, Y[0], Y1[0], float(ls[0]) + float(ls0))


def phi_init(problem: ProblemL):
    b = problem.boundary
    return b.T1, b.T1perp + b.H1


def psi_init(problem: ProblemL):
    b = problem.boundary
    return -b.T1perp, b.T1


def Psi_init(problem: ProblemL):
    b = problem.boundary
    return b.T2, b.T2perp + b.H2


def phi(problem: ProblemL, lam, rescale: bool = False) -> PropagatorState:
    """phi(pi, lam): phi(0) = T1, phi^[1](0) = T1perp + H1."""
    return propagate(problem, lam, 0.0, np.pi, phi_init(problem), rescale)


def psi(problem: ProblemL, lam, rescale: bool = False) -> PropagatorState:
    """psi(pi, lam): psi(0) = -T1perp, psi^[1](0) = T1."""
    return propagate(problem, lam, 0.0, np.pi, psi_init(problem), rescale)


def Psi(problem: ProblemL, lam, rescale: bool = False) -> PropagatorState:
    """Psi(0, lam): Psi(pi) = T2, Psi^[1](pi) = T2perp + H2, propagated backward."""
    return propagate(problem, lam, np.pi, 0.0, Psi_init(problem), rescale)


def sample_batch(sigma: SigmaField, lam, xs, Y0, Y10):
    """Values of the solutions at the sorted positions ``xs`` (starting at x=0).

    Returns ``(Y, Y1)`` of shape (B, K, m, k).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    xs = np.asarray(xs, dtype=float)
    Ys, Y1s = [], []
    Y, Y1 = Y0, Y10
    x = 0.0
    for xk in xs:
        Y, Y1, _ = propagate_batch(sigma, lam, x, xk, Y, Y1, cap=np.inf)
        Ys.append(Y)
        Y1s.append(Y1)
        x = xk
    return np.stack(Ys, axis=1), np.stack(Y1s, axis=1)


def wronskian(Y_conj_state, Z_state):
    """<Y^dagger, Z> = Y(conj lam)^dagger Z^[1] - Y^[1](conj lam)^dagger Z.

    Arguments are ``(Y, Y1)`` pairs; the first must be evaluated at conj(lam).
    """
    Y, Y1 = Y_conj_state
    Z, Z1 = Z_state
    Yh = np.conj(np.swapaxes(Y, -1, -2))
    Y1h = np.conj(np.swapaxes(Y1, -1, -2))
    return Yh @ Z1 - Y1h @ Z


def block_generator(c: np.ndarray, lam: complex) -> np.ndarray:
    """2m x 2m generator of the first-order system on a cell with sigma = c."""
    m = c.shape[0]
    I = np.eye(m)
    return np.block([[c, I], [-c @ c - lam * I, -c]])
