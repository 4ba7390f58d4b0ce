"""Domain types, projector algebra and boundary-data handling.

The problem is

    -(Y^[1])' - sigma Y^[1] - sigma^2 Y = lam Y,   Y^[1] = Y' - sigma Y,   x in (0, pi)

with boundary conditions

    T1 (Y^[1](0) - H1 Y(0)) - T1perp Y(0) = 0,
    T2 (Y^[1](pi) - H2 Y(pi)) - T2perp Y(pi) = 0.

``sigma`` is stored as a piecewise-constant Hermitian matrix field on a
uniform partition of [0, pi].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import BadH, NotHermitian, NotProjector, ShapeError

TOL_STRUCT = 1e-12
RANK_RTOL = 1e-8


def as_matrix(a, m: int | None = None, name: str = "matrix") -> np.ndarray:
    out = np.array(a, dtype=complex)
    if out.ndim == 0:
        out = out.reshape(1, 1)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {out.shape}")
    if m is not None and out.shape[0] != m:
        raise ShapeError(f"{name} must be {m}x{m}, got {out.shape}")
    return out


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _abs_rank(a: np.ndarray, tol: float = RANK_RTOL) -> int:
    """Rank with an absolute cut; for stacks of projectors (norm <= 1)."""
    return int(np.sum(np.linalg.svd(a, compute_uv=False) > tol))


def projector_onto_range(a, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthogonal projector onto the column space of ``a``.

    Singular values below ``rtol * s_max`` are treated as zero; an
    (almost) zero matrix gives the zero projector.
    """
    a = np.asarray(a, dtype=complex)
    u, s, _ = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], a.shape[0]), dtype=complex)
    r = int(np.sum(s > rtol * s[0]))
    q = u[:, :r]
    return hermitize(q @ q.conj().T)


def snap_to_projector(a: np.ndarray, rank: int | None = None, window: float = 0.3):
    """Nearest orthogonal projector to a Hermitian estimate.

    Returns ``(P, distance, ok)``.  With ``rank`` given the top ``rank``
    eigenvectors are kept; otherwise eigenvalues are rounded to {0, 1}.
    ``ok`` is False when some eigenvalue is farther than ``window`` from
    both 0 and 1.
    """
    h = hermitize(np.asarray(a, dtype=complex))
    w, v = np.linalg.eigh(h)
    ok = bool(np.all(np.minimum(np.abs(w), np.abs(w - 1.0)) <= window))
    if rank is None:
        keep = w > 0.5
    else:
        keep = np.zeros(w.size, dtype=bool)
        if rank > 0:
            keep[np.argsort(w)[::-1][:rank]] = True
    q = v[:, keep]
    p = hermitize(q @ q.conj().T)
    return p, float(np.linalg.norm(h - p, 2)), ok


def _check_projector(t: np.ndarray, name: str) -> None:
    if np.max(np.abs(t - t.conj().T), initial=0.0) > TOL_STRUCT:
        raise NotProjector(f"{name} is not Hermitian")
    if np.max(np.abs(t @ t - t), initial=0.0) > TOL_STRUCT:
        raise NotProjector(f"{name} is not idempotent")


def _check_h(h: np.ndarray, t: np.ndarray, name: str) -> None:
    if np.max(np.abs(h - h.conj().T), initial=0.0) > TOL_STRUCT:
        raise BadH(f"{name} is not Hermitian")
    if np.max(np.abs(h - t @ h @ t), initial=0.0) > TOL_STRUCT:
        raise BadH(f"{name} does not satisfy H = T H T")


@dataclass(frozen=True, eq=False)
class BoundaryData:
    m: int
    T1: np.ndarray
    T2: np.ndarray
    H1: np.ndarray
    H2: np.ndarray

    @property
    def I(self) -> np.ndarray:
        return np.eye(self.m, dtype=complex)

    @property
    def T1perp(self) -> np.ndarray:
        return self.I - self.T1

    @property
    def T2perp(self) -> np.ndarray:
        return self.I - self.T2

    @cached_property
    def p(self) -> int:
        """dim(Ran T1 & Ran T2)."""
        stacked = np.vstack([self.T1perp, self.T2perp])
        return self.m - _abs_rank(stacked)

    @cached_property
    def p_perp(self) -> int:
        """dim(Ker T1 & Ker T2)."""
        stacked = np.vstack([self.T1, self.T2])
        return self.m - _abs_rank(stacked)


def validate_boundary(T1, T2, H1=None, H2=None, m: int | None = None) -> BoundaryData:
    T1 = as_matrix(T1, m, "T1")
    m = T1.shape[0]
    T2 = as_matrix(T2, m, "T2")
    H1 = np.zeros((m, m), complex) if H1 is None else as_matrix(H1, m, "H1")
    H2 = np.zeros((m, m), complex) if H2 is None else as_matrix(H2, m, "H2")
    _check_projector(T1, "T1")
    _check_projector(T2, "T2")
    _check_h(H1, T1, "H1")
    _check_h(H2, T2, "H2")
    return BoundaryData(m, T1, T2, H1, H2)


@dataclass(frozen=True, eq=False)
class SigmaField:
    """Piecewise-constant Hermitian field; ``cells[i]`` lives on
    (i*pi/N, (i+1)*pi/N)."""

    cells: np.ndarray

    def __post_init__(self):
        c = np.array(self.cells, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] < 1:
            raise ShapeError(f"sigma cells must have shape (N, m, m), got {c.shape}")
        if np.max(np.abs(c - np.conj(np.swapaxes(c, 1, 2)))) > TOL_STRUCT:
            raise NotHermitian("sigma cells must be Hermitian")
        object.__setattr__(self, "cells", c)

    @property
    def N(self) -> int:
        return self.cells.shape[0]

    @property
    def m(self) -> int:
        return self.cells.shape[1]

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, np.pi, self.N + 1)

    @classmethod
    def zero(cls, m: int, N: int = 1) -> "SigmaField":
        return cls(np.zeros((N, m, m), complex))

    @classmethod
    def constant(cls, c) -> "SigmaField":
        return cls(as_matrix(c)[None])

    def shifted(self, c: np.ndarray) -> "SigmaField":
        return SigmaField(self.cells + c[None])

    def refined(self, factor: int) -> "SigmaField":
        """Same field on a partition ``factor`` times finer."""
        return SigmaField(np.repeat(self.cells, factor, axis=0))

    def sup_norm(self) -> float:
        return float(max(np.linalg.norm(c, 2) for c in self.cells))

    def __call__(self, x: float) -> np.ndarray:
        i = min(int(x / np.pi * self.N), self.N - 1)
        return self.cells[max(i, 0)]


@dataclass(frozen=True, eq=False)
class ProblemL:
    sigma: SigmaField
    boundary: BoundaryData

    def __post_init__(self):
        if self.sigma.m != self.boundary.m:
            raise ShapeError("sigma and boundary dimensions differ")

    @property
    def m(self) -> int:
        return self.boundary.m

    @property
    def p(self) -> int:
        return self.boundary.p

    @property
    def p_perp(self) -> int:
        return self.boundary.p_perp

    @property
    def is_zero_case(self) -> bool:
        b = self.boundary
        return not (np.any(self.sigma.cells) or np.any(b.H1) or np.any(b.H2))


def make_problem(sigma_cells, T1, T2, H1=None, H2=None) -> ProblemL:
    boundary = validate_boundary(T1, T2, H1, H2)
    if sigma_cells is None:
        sigma = SigmaField.zero(boundary.m)
    elif isinstance(sigma_cells, SigmaField):
        sigma = sigma_cells
    else:
        sigma = SigmaField(sigma_cells)
    return ProblemL(sigma, boundary)


def normalize_H1(problem: ProblemL) -> ProblemL:
    """Move H1 into sigma: sigma += H1, H2 -= T2 H1 T2, H1 = 0.

    The spectral data are unchanged by this transform.
    """
    b = problem.boundary
    if not np.any(b.H1):
        return problem
    H2 = hermitize(b.H2 - b.T2 @ b.H1 @ b.T2)
    nb = BoundaryData(b.m, b.T1, b.T2, np.zeros_like(b.H1), H2)
    return ProblemL(problem.sigma.shifted(b.H1), nb)


class SpectralIndex(NamedTuple):
    n: int
    k: int


def index_set(boundary: BoundaryData, n_max: int):
    """Index set J truncated at n <= n_max, lexicographically ordered.

    Returns ``(indices, p, p_perp)``.  k is 1-based.
    """
    pp = boundary.p_perp
    idx = [SpectralIndex(0, k) for k in range(pp + 1, boundary.m + 1)]
    idx += [SpectralIndex(n, k) for n in range(1, n_max + 1) for k in range(1, boundary.m + 1)]
    return idx, boundary.p, pp


@dataclass(eq=False)
class SpectralEntry:
    n: int
    k: int
    lam: float
    alpha: np.ndarray
    multiplicity: int = 1

    @property
    def index(self) -> SpectralIndex:
        return SpectralIndex(self.n, self.k)

    @property
    def rho(self) -> complex | float:
        if self.lam >= 0:
            return float(np.sqrt(self.lam))
        return 1j * float(np.sqrt(-self.lam))


def group_tolerance(lam: float) -> float:
    return 1e-6 * (1.0 + abs(lam))


@dataclass(eq=False)
class SpectralDataSet:
    m: int
    entries: list[SpectralEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: (e.n, e.k))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def n_max(self) -> int:
        return max(e.n for e in self.entries)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries])

    @cached_property
    def groups(self) -> list[list[int]]:
        """Maximal runs of (numerically) equal eigenvalues, as entry positions."""
        out: list[list[int]] = []
        for i, e in enumerate(self.entries):
            if out and abs(e.lam - self.entries[out[-1][0]].lam) < group_tolerance(e.lam):
                out[-1].append(i)
            else:
                out.append([i])
        return out

    def alpha_prime(self) -> list[np.ndarray]:
        """Weights with each group's matrix kept on its first index only."""
        z = np.zeros((self.m, self.m), complex)
        out = [z] * len(self.entries)
        for g in self.groups:
            out[g[0]] = self.entries[g[0]].alpha
        return out

    def by_n(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, e in enumerate(self.entries):
            out.setdefault(e.n, []).append(i)
        return out

    def truncated(self, n_max: int) -> "SpectralDataSet":
        return SpectralDataSet(self.m, [e for e in self.entries if e.n <= n_max])

    def check(self, tol: float = 1e-8) -> list[str]:
        """Structural problems of the data set (empty list when valid)."""
        issues = []
        lam = self.lambdas
        if np.any(np.diff(lam) < -group_tolerance(float(np.max(np.abs(lam), initial=0.0)))):
            issues.append("eigenvalues not non-decreasing in index order")
        for e in self.entries:
            a = e.alpha
            if np.max(np.abs(a - a.conj().T)) > tol * max(1.0, np.linalg.norm(a)):
                issues.append(f"alpha{e.index} not Hermitian")
            if np.min(np.linalg.eigvalsh(hermitize(a))) < -tol * np.linalg.norm(a, 2):
                issues.append(f"alpha{e.index} not PSD")
        for g in self.groups:
            a0 = self.entries[g[0]].alpha
            for i in g[1:]:
                if np.max(np.abs(self.entries[i].alpha - a0)) > tol * max(1.0, np.linalg.norm(a0)):
                    issues.append(f"alpha differs inside group at {self.entries[i].index}")
            r = numerical_rank(a0, 1e-6)
            if r != len(g):
                issues.append(f"rank(alpha{self.entries[g[0]].index}) = {r} != group size {len(g)}")
        return issues


def random_projector(rng: np.random.Generator, m: int, rank: int | None = None,
                     real: bool = False) -> np.ndarray:
    """Random orthogonal projector (helper for tests and demos)."""
    if rank is None:
        rank = int(rng.integers(0, m + 1))
    if rank == 0:
        return np.zeros((m, m), complex)
    z = rng.standard_normal((m, rank))
    if not real:
        z = z + 1j * rng.standard_normal((m, rank))
    q, _ = np.linalg.qr(z)
    return hermitize(q @ q.conj().T)


def random_hermitian(rng: np.random.Generator, m: int, scale: float = 1.0,
                     real: bool = False) -> np.ndarray:
    z = rng.standard_normal((m, m))
    if not real:
        z = z + 1j * rng.standard_normal((m, m))
    h = hermitize(z)
    return scale * h / np.linalg.norm(h, 2)


def random_sigma(rng: np.random.Generator, m: int, N: int, amplitude: float = 1.0) -> SigmaField:
    """Piecewise-constant Hermitian field with every cell norm <= amplitude."""
    cells = [random_hermitian(rng, m, amplitude * rng.uniform(0.2, 1.0)) for _ in range(N)]
    return SigmaField(np.array(cells))
