import numpy as np
import pytest

from matsl.basis import (
    build_Y,
    eigenfunction_family,
    family_to_csv,
    frame_bounds,
    gram,
    quadratic_closeness,
    select_E,
)
from matsl.core import SpectralDataSet, SpectralEntry, make_problem, random_projector, random_sigma, validate_boundary
from matsl.errors import IndexMismatch, RankMismatch
from matsl.spectrum import spectral_data
from matsl.zerocase import zero_spectral_data

from conftest import boundary, zero_problem


def test_select_E_scalar_dirichlet():
    E = select_E(zero_spectral_data(boundary("dd"), 3), np.zeros((1, 1)))
    assert all(np.allclose(v, [1.0]) for v in E.values())


def test_select_E_orthonormal_groups(rng):
    for name in ("mixed", "star3"):
        b = boundary(name)
        d = zero_spectral_data(b, 6)
        E = select_E(d, b.T1)
        for g in d.groups:
            V = np.stack([E[d.entries[i].index] for i in g], axis=1)
            assert np.allclose(V.conj().T @ V, np.eye(len(g)), atol=1e-10)


def test_select_E_rank_mismatch():
    d = SpectralDataSet(2, [SpectralEntry(1, 1, 1.0, np.diag([1.0, 0.0])),
                            SpectralEntry(1, 2, 1.0, np.diag([1.0, 0.0]))])
    with pytest.raises(RankMismatch):
        select_E(d, np.zeros((2, 2)))


def test_phase_convention():
    b = boundary("star3")
    E = select_E(zero_spectral_data(b, 3), b.T1)
    for v in E.values():
        j = int(np.argmax(np.abs(v)))
        assert abs(v[j].imag) < 1e-14 and v[j].real > 0


def test_dirichlet_family():
    d = zero_spectral_data(boundary("dd"), 16)
    fam = build_Y(d, np.zeros((1, 1)), 2048)
    x = fam.x
    assert np.allclose(fam.entries[2].samples[:, 0], np.sin(3 * x), atol=1e-12)
    lo, hi = frame_bounds(fam)
    assert abs(lo - np.pi / 2) < 1e-6 and abs(hi - np.pi / 2) < 1e-6


def test_robin_constant_entry():
    fam = build_Y(zero_spectral_data(boundary("rr"), 4), np.eye(1), 2048)
    assert np.allclose(fam.entries[0].samples, 1.0)
    assert np.isclose(gram(fam)[0, 0].real, np.pi)


def test_grid_minimum():
    with pytest.raises(ValueError):
        build_Y(zero_spectral_data(boundary("dd"), 4), np.zeros((1, 1)), 100)


def test_star_frame_bounds():
    b = boundary("star3")
    fam = build_Y(zero_spectral_data(b, 16), b.T1, 4096)
    lo, hi = frame_bounds(fam, 16)
    assert abs(lo - np.pi / 2) < 1e-6 and abs(hi - np.pi / 2) < 1e-6


def test_zero_case_orthogonality(rng):
    b = validate_boundary(random_projector(rng, 2), random_projector(rng, 2))
    d = zero_spectral_data(b, 8)
    fam = build_Y(d, b.T1, 4096)
    G = gram(fam)
    for i, e in enumerate(d):
        for j, f in enumerate(d):
            if e.n != f.n:
                assert abs(G[i, j]) < 1e-8
    assert frame_bounds(fam)[1] <= np.pi + 0.1


def test_eigenfunctions_equal_family_in_zero_case():
    p = zero_problem("star3")
    d = spectral_data(p, 6)
    a = build_Y(d, p.boundary.T1, 1024)
    f = eigenfunction_family(p, d, 1024)
    assert np.max(np.abs(a.matrix() - f.matrix())) < 1e-8


def test_perturbed_frame_bounds_stable(rng):
    p = make_problem(random_sigma(rng, 1, 6, 0.5).cells, np.zeros((1, 1)), np.zeros((1, 1)))
    d = spectral_data(p, 32)
    fam = eigenfunction_family(p, d, 4096)
    lows = [frame_bounds(fam, N)[0] for N in (8, 16, 32)]
    assert min(lows) > 0.3 * np.pi / 2
    assert (max(lows) - min(lows)) / max(lows) < 0.1
    # eigenfunctions of distinct eigenvalues are orthogonal
    G = gram(fam)
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) < 1e-5


def test_quadratic_closeness():
    b = boundary("dd")
    d = zero_spectral_data(b, 8)
    fam = build_Y(d, b.T1, 2048)
    assert quadratic_closeness(fam, fam).total == 0.0
    flipped = build_Y(d, b.T1, 2048)
    flipped.entries[3].samples = -flipped.entries[3].samples
    assert np.isclose(quadratic_closeness(flipped, fam).total, 4 * np.pi / 2, atol=1e-9)
    with pytest.raises(IndexMismatch):
        quadratic_closeness(fam.truncated(4), fam)


def test_closeness_tail_decays(rng):
    p = make_problem(random_sigma(rng, 1, 4, 0.5).cells, np.zeros((1, 1)), np.zeros((1, 1)))
    d = spectral_data(p, 32)
    z = zero_spectral_data(p.boundary, 32)
    rep = quadratic_closeness(build_Y(d, p.boundary.T1, 4096), build_Y(z, p.boundary.T1, 4096))
    assert rep.tail.passed


def test_csv_export():
    fam = build_Y(zero_spectral_data(boundary("dd"), 2), np.zeros((1, 1)), 1024)
    lines = family_to_csv(fam, (2, 1)).strip().splitlines()
    assert lines[0] == "x,re_1,im_1" and len(lines) == 1025
