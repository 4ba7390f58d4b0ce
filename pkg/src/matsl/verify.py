"""Invariant checks on a problem and its computed spectral data.

Each check returns a :class:`Check` with the worst residual found and the
tolerance it was held to.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemL, SpectralDataSet, numerical_rank
from .propagator import phi_init, propagate_batch, sample_batch, wronskian
from .spectrum import V2_phi, weyl_batch

QUAD_NODES = 4096


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: residual {self.residual:.3e} (tol {self.tol:.0e})"


def wronskian_drift(problem: ProblemL, lam: complex, K: int = 64) -> float:
    """Relative x-drift of <phi(conj lam)^dagger, phi(lam)> over [0, pi]."""
    xs = np.linspace(0.0, np.pi, K + 1)[1:]
    Y0, Y10 = phi_init(problem)
    Y, Y1 = sample_batch(problem.sigma, [lam, np.conj(lam)], xs, Y0, Y10)
    W = wronskian((Y[1], Y1[1]), (Y[0], Y1[0]))  # (K, m, m)
    W0 = wronskian((Y0, Y10), (Y0, Y10))
    scale = 1.0 + max(np.max(np.abs(W)), np.max(np.abs(W0)))
    return float(np.max(np.abs(W - W0)) / scale)


def val_residual(problem: ProblemL, data: SpectralDataSet) -> float:
    """max ||V2(phi(., lam_nk)) alpha_nk|| over the data."""
    lams = data.lambdas
    V, _ = V2_phi(problem, lams)
    return float(max(np.linalg.norm(V[i] @ e.alpha, 2) for i, e in enumerate(data)))


def cell_quadrature(sigma, K: int = QUAD_NODES):
    """Composite Simpson nodes and weights on [0, pi], split at the cell edges.

    Eigenfunction derivatives jump where sigma does, so each cell gets its
    own Simpson rule.  Returns ``(x, w)`` with about K nodes.
    """
    q = max(2, 2 * (K // (2 * sigma.N)))
    simpson = np.full(q + 1, 2.0)
    simpson[1::2] = 4.0
    simpson[0] = simpson[-1] = 1.0
    edges = sigma.edges
    x = np.concatenate([np.linspace(a, b, q + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [[np.pi]])
    w = np.zeros(x.size)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        w[i * q:(i + 1) * q + 1] += simpson * (b - a) / (3 * q)
    return x, w


def sym1_residual(problem: ProblemL, data: SpectralDataSet, K: int = QUAD_NODES) -> float:
    """Orthogonality of the weighted eigenfunctions.

    alpha_i (int phi_i^dagger phi_j) alpha_j is 0 across distinct eigenvalues
    and alpha_i within one group.
    """
    xs, w = cell_quadrature(problem.sigma, K)
    Y0, Y10 = phi_init(problem)
    groups = data.groups
    lams = np.array([data.entries[g[0]].lam for g in groups])
    alphas = [data.entries[g[0]].alpha for g in groups]
    Y, _ = sample_batch(problem.sigma, lams, xs[1:], Y0, Y10)
    Y = np.concatenate([np.broadcast_to(Y0, (len(lams), 1) + Y0.shape), Y], axis=1)  # (G, K, m, m)
    worst = 0.0
    for i in range(len(lams)):
        for j in range(i, len(lams)):
            # int phi_i^dagger phi_j dx
            S = np.einsum("k,kba,kbc->ac", w, Y[i].conj(), Y[j])
            target = alphas[i] if i == j else 0.0
            res = np.linalg.norm(alphas[i] @ S @ alphas[j] - target, 2)
            worst = max(worst, float(res))
    return worst


def psd_rank_residual(data: SpectralDataSet, rtol: float = 1e-6) -> float:
    """Worst negative eigenvalue (relative), or 1 on a rank/multiplicity mismatch."""
    worst = 0.0
    for g in data.groups:
        a = data.entries[g[0]].alpha
        w = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
        worst = max(worst, float(-w[0] / max(w[-1], 1e-300)))
        if numerical_rank(a, rtol) != len(g):
            return 1.0
    return worst


def hermitian_residual(data: SpectralDataSet) -> float:
    return float(max(np.max(np.abs(e.alpha - e.alpha.conj().T)) for e in data))


def weyl_symmetry_residual(problem: ProblemL, points=None) -> float:
    """max ||M(conj lam)^dagger - M(lam)|| on a fixed complex test set."""
    if points is None:
        points = np.array([0.5 + 0.5j, 1.5 + 0.5j, -2.0 + 1.0j, 3.3 + 0.2j, 7.0 + 2.0j,
                           -0.5 - 1.0j, 12.0 + 0.7j, 0.1 + 3.0j, 25.0 - 0.5j, 4.2 + 4.2j])
    M = weyl_batch(problem, points)
    Mc = weyl_batch(problem, np.conj(points))
    return float(np.max(np.abs(np.conj(np.swapaxes(Mc, 1, 2)) - M)))
