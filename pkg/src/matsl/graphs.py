"""Reduction of Sturm-Liouville problems on metric graphs to one matrix problem.

Every edge becomes one component of a vector function on [0, pi].  After
subdivision to a common edge length the graph is made bipartite; edges are
oriented from class-1 vertices (x = 0) to class-2 vertices (x = pi).  A
vertex v with Kirchhoff parameter h and incident edge set S contributes

    T^v = (1/|S|) ones on S x S,   H^v = h T^v

to T1, H1 (class 1) or T2, H2 (class 2).  In the reduced problem this
reads: the function values agree on S and the sum over S of the
quasi-derivatives, taken in the direction of increasing x, equals
|S| h times the common value.  Dirichlet vertices contribute nothing.

Edge lengths are normalized to pi by x -> (pi/L) x, which multiplies sigma
and h by L/pi; eigenvalues of the original graph are lam_reduced * (pi/L)^2.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import gcd, lcm

import numpy as np

from .core import ProblemL, make_problem
from .errors import GraphError, IrrationalLengths, OrientationConflict

DENOMINATOR_CAP = 64
DIRICHLET = "dirichlet"


@dataclass
class Edge:
    v0: object
    v1: object
    length: Fraction
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(1))  # real cells along v0 -> v1


@dataclass
class GraphSpec:
    """Edges with scalar piecewise-constant sigma, vertices with a condition.

    ``vertices`` maps a vertex id to ``"dirichlet"`` or a real Kirchhoff
    parameter h.  ``classes`` (after normalization) maps ids to 1 or 2, and
    ``scale`` is the factor pi/L relating reduced and original x.
    """

    edges: list[Edge]
    vertices: dict
    classes: dict | None = None
    scale: float = 1.0

    def __post_init__(self):
        for e in self.edges:
            for v in (e.v0, e.v1):
                if v not in self.vertices:
                    raise GraphError(f"edge endpoint {v!r} is not a declared vertex")
            if e.v0 == e.v1:
                raise GraphError(f"loop at vertex {e.v0!r} is not supported; subdivide it")
            if not e.length > 0:
                raise GraphError("edge lengths must be positive")
            e.sigma = np.atleast_1d(np.asarray(e.sigma, dtype=float))
        for v, c in self.vertices.items():
            if c != DIRICHLET and not isinstance(c, (int, float)):
                raise GraphError(f"vertex {v!r}: condition must be 'dirichlet' or a real h")
        if not self.edges:
            raise GraphError("graph has no edges")
        if not _connected(self):
            raise GraphError("graph is not connected")

    def adjacency(self) -> dict:
        adj = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            adj[e.v0].append((i, e.v1))
            adj[e.v1].append((i, e.v0))
        return adj

    def degree(self, v) -> int:
        return sum((e.v0 == v) + (e.v1 == v) for e in self.edges)


def _connected(g: GraphSpec) -> bool:
    used = {v for e in g.edges for v in (e.v0, e.v1)}
    if set(g.vertices) - used:
        return False
    adj = g.adjacency()
    start = g.edges[0].v0
    seen = {start}
    todo = deque([start])
    while todo:
        for _, w in adj[todo.popleft()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(g.vertices)


def _as_fraction(x) -> Fraction:
    if isinstance(x, (list, tuple)):
        return Fraction(int(x[0]), int(x[1]))
    if isinstance(x, Fraction):
        return x
    f = Fraction(x).limit_denominator(DENOMINATOR_CAP)
    if abs(float(f) - float(x)) > 1e-12 * max(1.0, abs(float(x))):
        raise IrrationalLengths(f"length {x} has no rational form with denominator <= {DENOMINATOR_CAP}")
    return f


def _common_length(lengths: list[Fraction]) -> Fraction:
    den = lcm(*[q.denominator for q in lengths])
    if den > DENOMINATOR_CAP:
        raise IrrationalLengths(f"common denominator {den} exceeds {DENOMINATOR_CAP}")
    nums = [int(q * den) for q in lengths]
    return Fraction(gcd(*nums), den)


def _subdivide(g: GraphSpec, parts: list[int]) -> GraphSpec:
    edges, vertices = [], dict(g.vertices)
    for i, (e, q) in enumerate(zip(g.edges, parts)):
        cells = np.repeat(e.sigma, q)
        n = cells.size // q
        ids = [e.v0] + [("aux", i, j, len(g.edges)) for j in range(1, q)] + [e.v1]
        for v in ids[1:-1]:
            vertices[v] = 0.0
        for j in range(q):
            edges.append(Edge(ids[j], ids[j + 1], e.length / q, cells[j * n:(j + 1) * n]))
    return GraphSpec(edges, vertices, None, g.scale)


def _two_colour(g: GraphSpec):
    """Bipartition with the highest-degree vertex in class 2, or None."""
    adj = g.adjacency()
    start = max(g.vertices, key=lambda v: (g.degree(v), -list(g.vertices).index(v)))
    colour = {start: 2}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for _, w in adj[v]:
            if w not in colour:
                colour[w] = 3 - colour[v]
                todo.append(w)
            elif colour[w] == colour[v]:
                return None
    return colour


def bipartite_normalize(g: GraphSpec) -> GraphSpec:
    """Equal edge lengths, bipartite, with classes and the x-scale recorded."""
    lengths = [_as_fraction(e.length) for e in g.edges]
    L = _common_length(lengths)
    h = _subdivide(g, [int(q / L) for q in lengths])
    colour = _two_colour(h)
    if colour is None:
        # odd cycle: halving every edge doubles every cycle length
        L = L / 2
        h = _subdivide(h, [2] * len(h.edges))
        colour = _two_colour(h)
    return replace(h, classes=colour, scale=float(np.pi / L))


def _cells_matrix(sigmas: list[np.ndarray]) -> np.ndarray:
    n = lcm(*[s.size for s in sigmas])
    cols = [np.repeat(s, n // s.size) for s in sigmas]
    out = np.zeros((n, len(sigmas), len(sigmas)))
    for j, c in enumerate(cols):
        out[:, j, j] = c
    return out


def general_reduction(g: GraphSpec) -> ProblemL:
    """Matrix problem on [0, pi] of a normalized graph (see bipartite_normalize)."""
    if g.classes is None:
        raise GraphError("graph has no bipartition; run bipartite_normalize first")
    if len({e.length for e in g.edges}) != 1:
        raise GraphError("edge lengths differ; run bipartite_normalize first")
    c = 1.0 / g.scale  # L / pi
    m = len(g.edges)
    sigmas = []
    for e in g.edges:
        a, b = g.classes[e.v0], g.classes[e.v1]
        if a == b:
            raise OrientationConflict(f"edge {e.v0!r}-{e.v1!r} has both ends in class {a}")
        # orientation reversal turns sigma(x) into -sigma(L - x)
        s = e.sigma if a == 1 else -e.sigma[::-1]
        sigmas.append(c * s)
    T = {1: np.zeros((m, m)), 2: np.zeros((m, m))}
    H = {1: np.zeros((m, m)), 2: np.zeros((m, m))}
    for v, cond in g.vertices.items():
        if cond == DIRICHLET:
            continue
        S = [i for i, e in enumerate(g.edges) if v in (e.v0, e.v1)]
        Tv = np.zeros((m, m))
        Tv[np.ix_(S, S)] = 1.0 / len(S)
        T[g.classes[v]] += Tv
        H[g.classes[v]] += c * float(cond) * Tv
    return make_problem(_cells_matrix(sigmas), T[1], T[2], H[1], H[2])


def star_problem(m: int, h: float = 0.0, boundary_spec=None, sigmas=None) -> ProblemL:
    """Star graph with m edges of length pi, pendant vertices at x = 0.

    ``boundary_spec`` is None for Dirichlet pendant vertices, or a list of r
    Robin parameters h_1..h_r for the first r pendant vertices (the rest
    Dirichlet).  The central vertex carries Kirchhoff(h).
    """
    if m < 2:
        raise GraphError("a star needs at least two edges")
    hs = [] if boundary_spec is None or boundary_spec == DIRICHLET else [float(x) for x in boundary_spec]
    if len(hs) > m:
        raise GraphError(f"{len(hs)} Robin parameters for {m} pendant vertices")
    T1 = np.diag([1.0] * len(hs) + [0.0] * (m - len(hs)))
    H1 = np.diag(hs + [0.0] * (m - len(hs)))
    T2 = np.full((m, m), 1.0 / m)
    sig = [np.zeros(1)] * m if sigmas is None else [np.atleast_1d(np.asarray(s, float)) for s in sigmas]
    if len(sig) != m:
        raise GraphError(f"{len(sig)} sigma fields for {m} edges")
    return make_problem(_cells_matrix(sig), T1, T2, H1, h * T2)


def star_graph(m: int, h: float = 0.0, boundary_spec=None, sigmas=None) -> GraphSpec:
    """The same star as a GraphSpec, for the general reduction path."""
    hs = [] if boundary_spec is None or boundary_spec == DIRICHLET else list(boundary_spec)
    vertices = {"c": float(h)}
    edges = []
    for j in range(m):
        vertices[j] = float(hs[j]) if j < len(hs) else DIRICHLET
        s = np.zeros(1) if sigmas is None else sigmas[j]
        edges.append(Edge(j, "c", Fraction(1), s))
    # unit lengths rescaled to pi: undo the sigma/h factor by scaling inputs by pi
    g = GraphSpec(edges, vertices)
    for e in g.edges:
        e.sigma = e.sigma * np.pi
    g.vertices = {v: (c if c == DIRICHLET else c * np.pi) for v, c in vertices.items()}
    return g


# -- JSON ---------------------------------------------------------------------------

def _vertex_condition(c):
    if c == DIRICHLET:
        return DIRICHLET
    if isinstance(c, dict) and set(c) == {"kirchhoff"}:
        return float(c["kirchhoff"])
    raise GraphError(f"unknown vertex condition {c!r}")


def graph_from_dict(d: dict) -> GraphSpec:
    try:
        vertices = {}
        for v in d["vertices"]:
            if v["id"] in vertices:
                raise GraphError(f"vertex {v['id']!r} declared twice")
            vertices[v["id"]] = _vertex_condition(v["condition"])
        edges = [Edge(e["v0"], e["v1"], _as_fraction(e.get("length", [1, 1])),
                      np.asarray(e.get("sigma", [0.0]), dtype=float))
                 for e in d["edges"]]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph description: {exc}") from exc
    return GraphSpec(edges, vertices)


def load_graph(path) -> GraphSpec:
    with open(path) as f:
        return graph_from_dict(json.load(f))
