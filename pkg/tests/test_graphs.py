import json
from fractions import Fraction

import numpy as np
import pytest

from matsl.core import validate_boundary
from matsl.errors import GraphError, IrrationalLengths, OrientationConflict
from matsl.graphs import (
    Edge,
    GraphSpec,
    bipartite_normalize,
    general_reduction,
    graph_from_dict,
    star_graph,
    star_problem,
)
from matsl.spectrum import spectral_data
from matsl.zerocase import roots_r


def _path(n_edges=2, ends="dirichlet"):
    vs = {0: ends, n_edges: ends}
    vs.update({i: 0.0 for i in range(1, n_edges)})
    return GraphSpec([Edge(i, i + 1, Fraction(1)) for i in range(n_edges)], vs)


def test_star_matrices():
    p = star_problem(3)
    assert np.allclose(p.boundary.T1, 0) and np.allclose(p.boundary.T2, np.full((3, 3), 1 / 3))
    assert np.allclose(p.boundary.H2, 0)
    assert np.allclose(star_problem(3, h=2.0).boundary.H2, np.full((3, 3), 2 / 3))
    assert np.allclose(star_problem(3, boundary_spec=[0.0]).boundary.T1, np.diag([1.0, 0, 0]))


def test_star_general_path_matches():
    for h, spec in ((0.0, None), (1.5, [0.3, -0.2])):
        a = star_problem(3, h, spec)
        b = general_reduction(bipartite_normalize(star_graph(3, h, spec)))
        for name in ("T1", "T2", "H1", "H2"):
            assert np.allclose(getattr(a.boundary, name), getattr(b.boundary, name), atol=1e-14)


def test_star_spectrum_pattern():
    d = spectral_data(star_problem(3), 8)
    for g in d.groups:
        lam = d.entries[g[0]].lam
        rho = np.sqrt(lam)
        if abs(rho - round(rho)) < 1e-6:
            assert len(g) == 2 and abs(lam - round(rho) ** 2) < 1e-8
        else:
            assert len(g) == 1 and abs(lam - (np.floor(rho) + 0.5) ** 2) < 1e-8


def test_single_edge_unchanged():
    g = GraphSpec([Edge("a", "b", Fraction(1))], {"a": "dirichlet", "b": "dirichlet"})
    n = bipartite_normalize(g)
    assert len(n.edges) == 1 and n.classes["a"] != n.classes["b"]


def test_path_classes_and_spectrum():
    g = bipartite_normalize(_path())
    assert len(g.edges) == 2
    assert g.classes[0] == g.classes[2] != g.classes[1]
    p = general_reduction(g)
    assert np.allclose(p.boundary.T1, 0) and np.allclose(p.boundary.T2, np.full((2, 2), 0.5))
    assert np.allclose(roots_r(p.boundary), [0.0, 0.5], atol=1e-10)
    lams = spectral_data(p, 4).lambdas
    assert np.allclose(lams[:8], [(n / 2) ** 2 for n in range(1, 9)], atol=1e-8)


def test_triangle_subdivided():
    tri = GraphSpec([Edge(0, 1, Fraction(1)), Edge(1, 2, Fraction(1)), Edge(2, 0, Fraction(1))],
                    {0: 0.0, 1: 0.0, 2: 0.0})
    g = bipartite_normalize(tri)
    assert len(g.edges) == 6
    new = [v for v in g.vertices if v not in (0, 1, 2)]
    assert len(new) == 3 and len({g.classes[v] for v in new}) == 1
    p = general_reduction(g)
    d = spectral_data(p, 3)
    # m eigenvalues per unit interval of rho
    for n in range(1, 3):
        assert sum(n <= np.sqrt(max(l, 0)) < n + 1 for l in d.lambdas) == 6


def test_unequal_rational_lengths():
    g = GraphSpec([Edge(0, 1, Fraction(1)), Edge(1, 2, Fraction(1, 2))],
                  {0: "dirichlet", 1: 0.0, 2: "dirichlet"})
    n = bipartite_normalize(g)
    assert len(n.edges) == 3 and np.isclose(n.scale, 2 * np.pi)


def test_irrational_lengths():
    g = GraphSpec([Edge(0, 1, 1.0), Edge(1, 2, np.sqrt(2))], {0: "dirichlet", 1: 0.0, 2: "dirichlet"})
    with pytest.raises(IrrationalLengths):
        bipartite_normalize(g)


def test_graph_errors():
    with pytest.raises(GraphError):
        GraphSpec([Edge(0, 1, Fraction(1))], {0: 0.0})
    with pytest.raises(GraphError):
        GraphSpec([Edge(0, 1, Fraction(1)), Edge(2, 3, Fraction(1))], {i: 0.0 for i in range(4)})
    g = bipartite_normalize(_path())
    g.classes[1] = g.classes[0]
    with pytest.raises(OrientationConflict):
        general_reduction(g)


def test_random_graphs_validate(rng):
    for _ in range(20):
        nv = int(rng.integers(2, 7))
        edges = [Edge(i, int(rng.integers(0, i)), Fraction(int(rng.integers(1, 3)))) for i in range(1, nv)]
        if nv > 2 and rng.random() < 0.5:
            edges.append(Edge(0, nv - 1, Fraction(1)))  # close a cycle
        vs = {i: ("dirichlet" if rng.random() < 0.3 else float(rng.normal())) for i in range(nv)}
        g = bipartite_normalize(GraphSpec(edges[:8], vs))
        p = general_reduction(g)
        b = validate_boundary(p.boundary.T1, p.boundary.T2, p.boundary.H1, p.boundary.H2)
        kirchhoff = [v for v, c in g.vertices.items() if c != "dirichlet"]
        for j in (1, 2):
            T = getattr(b, f"T{j}")
            count = sum(1 for v in kirchhoff if g.classes[v] == j)
            assert np.linalg.matrix_rank(T, 1e-8) == count


def test_graph_json():
    d = {"edges": [{"v0": "a", "v1": "c", "length": [1, 1], "sigma": [0.1, 0.2]},
                   {"v0": "b", "v1": "c", "length": [1, 1]}],
         "vertices": [{"id": "a", "condition": "dirichlet"}, {"id": "b", "condition": "dirichlet"},
                      {"id": "c", "condition": {"kirchhoff": 0.0}}]}
    g = graph_from_dict(json.loads(json.dumps(d)))
    p = general_reduction(bipartite_normalize(g))
    assert p.m == 2 and np.allclose(p.boundary.T2, 0.5)
    with pytest.raises(GraphError):
        graph_from_dict({"edges": [], "vertices": [{"id": "a", "condition": "robin"}]})
