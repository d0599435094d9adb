import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from pointspectra.geometry import Configuration, Geometry
from pointspectra.principal import principal_matrix
from pointspectra.spectrum import (
    AsymmetryError,
    MonotonicityError,
    count_bound_states,
    eigenfunction,
    eigenvalue_branches,
    find_bound_states,
    symmetric_eigen,
)

FOUR_PI = 4 * math.pi


# Jacobi eigensolver ------------------------------------------------------

def test_diagonal_matrix():
    eb = symmetric_eigen(np.diag([3.0, 1.0, 2.0]))
    assert_allclose(eb.values, [1, 2, 3])
    assert_allclose(np.abs(eb.vectors), [[0, 0, 1], [1, 0, 0], [0, 1, 0]], atol=1e-15)


def test_two_by_two():
    a = 0.25
    eb = symmetric_eigen([[0, -a], [-a, 0]])
    assert_allclose(eb.values, [-a, a], rtol=1e-15)


def test_reconstruction_random():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((5, 5))
    M = B + B.T
    eb = symmetric_eigen(M)
    V = eb.vectors
    assert_allclose(V @ np.diag(eb.values) @ V.T, M, atol=1e-12)
    assert_allclose(V.T @ V, np.eye(5), atol=1e-12)
    assert_allclose(eb.values, np.linalg.eigvalsh(M), atol=1e-12)


def test_asymmetry_rejected():
    with pytest.raises(AsymmetryError):
        symmetric_eigen([[1.0, 2.0], [2.1, 1.0]])


def test_size_cap():
    with pytest.raises(ValueError):
        symmetric_eigen(np.eye(5), cap=4)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_jacobi_residuals(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    M = B + B.T
    eb = symmetric_eigen(M)
    norm = np.linalg.norm(M, 2)
    assert np.all(np.diff(eb.values) >= 0)
    assert_allclose(eb.vectors.T @ eb.vectors, np.eye(n), atol=1e-12)
    assert np.max(np.abs(M @ eb.vectors - eb.vectors * eb.values)) <= 1e-10 * max(norm, 1e-300)


# branches ----------------------------------------------------------------

def test_single_center_branch_linear():
    out = eigenvalue_branches(Geometry.flat3(), Configuration.single(1.0), [0.5, 1.0, 2.0])
    assert_allclose([b.values[0] for b in out], [-0.5 / FOUR_PI, 0.0, 1 / FOUR_PI], atol=1e-16)


def test_flat2_branches_increase():
    out = eigenvalue_branches(Geometry.flat2(), Configuration.collinear([1, 1], 3.0),
                              [0.2, 0.5, 1.0, 2.0])
    vals = np.array([b.values for b in out])
    assert np.all(np.diff(vals, axis=0) > 0)


def test_relativistic_branch_decreases_in_energy():
    out = eigenvalue_branches(Geometry.rel_flat2(1.0), Configuration.single(0.5),
                              [0.9, 0.5, 0.0, -0.9])
    vals = [b.values[0] for b in out]
    assert vals[0] < vals[1] < vals[2] < vals[3]


def test_grid_direction_checked():
    with pytest.raises(ValueError):
        eigenvalue_branches(Geometry.flat3(), Configuration.single(1.0), [2.0, 1.0])
    with pytest.raises(ValueError):
        eigenvalue_branches(Geometry.rel_flat2(1.0), Configuration.single(0.5), [0.0, 0.5])


def test_monotonicity_violation_reported(monkeypatch):
    import pointspectra.spectrum as sp
    real = sp._branches

    def flipped(geom, cfg, p, **kw):
        eb = real(geom, cfg, p, **kw)
        return sp.EigenBranches(-eb.values[::-1], eb.vectors, p)
    monkeypatch.setattr(sp, "_branches", flipped)
    with pytest.raises(MonotonicityError):
        eigenvalue_branches(Geometry.flat3(), Configuration.single(1.0), [0.5, 1.0])


# root finding ------------------------------------------------------------

@pytest.mark.parametrize("geom", [Geometry.flat3(), Geometry.flat2(), Geometry.h3(1.0),
                                  Geometry.h2(1.0)])
def test_single_center_root_at_mu(geom):
    states = find_bound_states(geom, Configuration.single(1.0))
    assert len(states) == 1
    assert_allclose(states[0].nu, 1.0, rtol=1e-10)
    assert_allclose(states[0].energy, -1.0, rtol=1e-10)
    assert states[0].multiplicity == 1


@pytest.mark.parametrize("geom,cfg,expect", [
    (Geometry.flat2(), Configuration.collinear([1, 1], 3.0), 2),
    (Geometry.flat3(), Configuration.collinear([1, 1], 0.5), 1),
    (Geometry.flat3(), Configuration.collinear([1, 2], 1.0), 2),
    (Geometry.flat2(), Configuration.collinear([1, 1], 1.0), 1),
    (Geometry.h3(1.0), Configuration.collinear([1, 1], 1.0), 2),
])
def test_counts(geom, cfg, expect):
    assert count_bound_states(geom, cfg) == expect
    assert sum(s.multiplicity for s in find_bound_states(geom, cfg)) == expect


def test_states_sorted_and_structured():
    geom, cfg = Geometry.h3(0.5), Configuration.collinear([1.0, 1.4, 0.8], 2.0)
    states = find_bound_states(geom, cfg)
    assert [s.energy for s in states] == sorted(s.energy for s in states)
    for s in states:
        phi = principal_matrix(geom, cfg, s.nu).entries
        norm = np.linalg.norm(phi, 2)
        assert abs(np.linalg.det(phi)) <= 1e-9 * norm ** cfg.n
        assert s.null_dim == s.multiplicity
        assert s.normalization > 0
        assert_allclose(phi @ s.amplitudes, 0, atol=1e-9 * norm)
    assert states[-1].nu < states[0].nu
    assert states[0].nu > max(cfg.mu)


def test_ground_state_amplitudes_positive():
    geom, cfg = Geometry.flat3(), Configuration.collinear([2.0, 1.0, 1.5, 3.0], 0.8)
    ground = find_bound_states(geom, cfg)[0]
    assert np.all(ground.amplitudes[:, 0] > 0)


def test_degenerate_root_merged():
    # two far-apart identical pairs: each symmetric/antisymmetric level is doubly degenerate
    D = 40.0
    dist = np.array([[0, 2, D, D + 2], [2, 0, D + 2, D], [D, D + 2, 0, 2],
                     [D + 2, D, 2, 0]], float)
    cfg = Configuration((1.0, 1.0, 1.0, 1.0), dist)
    states = find_bound_states(Geometry.flat3(), cfg, tol=1e-10)
    assert [s.multiplicity for s in states] == [2, 2]
    assert all(s.null_dim == 2 for s in states)
    assert count_bound_states(Geometry.flat3(), cfg, tol=1e-10) == 4


def test_relativistic_states_in_window():
    geom, cfg = Geometry.rel_flat2(1.0), Configuration.collinear([0.2, 0.4], 2.0)
    states = find_bound_states(geom, cfg)
    assert 1 <= len(states) <= 2
    for s in states:
        assert -1.0 < s.nu < 1.0 and s.energy == s.nu
        assert abs(np.linalg.det(principal_matrix(geom, cfg, s.nu).entries)) < 1e-9


def test_relativistic_single_center_at_mu():
    states = find_bound_states(Geometry.rel_flat2(1.0), Configuration.single(-0.3))
    assert_allclose(states[0].nu, -0.3, atol=1e-10)


# eigenfunction -----------------------------------------------------------

def test_eigenfunction_single_center():
    geom, cfg = Geometry.flat3(), Configuration.single(1.0)
    state = find_bound_states(geom, cfg)[0]
    expect = (1 / (8 * math.pi)) ** -0.5 * math.exp(-1) / FOUR_PI
    assert_allclose(eigenfunction(geom, cfg, state, [1.0]), expect, rtol=1e-9)
    assert_allclose(expect, 0.146763, rtol=1e-5)


def test_two_center_symmetric_amplitudes():
    geom, cfg = Geometry.flat2(), Configuration.collinear([1, 1], 3.0)
    ground, excited = find_bound_states(geom, cfg)
    assert_allclose(abs(ground.amplitudes[0, 0]), abs(ground.amplitudes[1, 0]), rtol=1e-9)
    assert_allclose(excited.amplitudes[0, 0], -excited.amplitudes[1, 0], rtol=1e-9)
    mid = [1.5, 1.5]
    g = eigenfunction(geom, cfg, ground, mid)
    e = eigenfunction(geom, cfg, excited, mid)
    assert g > abs(e)
    assert abs(e) < 1e-9 * g


def test_eigenfunction_rejects_center():
    geom, cfg = Geometry.flat3(), Configuration.single(1.0)
    state = find_bound_states(geom, cfg)[0]
    with pytest.raises(ValueError):
        eigenfunction(geom, cfg, state, [0.0])


# properties --------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 5), spacing=st.floats(0.1, 4.0),
       mu=st.lists(st.floats(0.2, 3.0), min_size=5, max_size=5),
       kind=st.sampled_from(["flat2", "flat3", "h3"]))
def test_count_at_most_n(n, spacing, mu, kind):
    geom = {"flat2": Geometry.flat2(), "flat3": Geometry.flat3(), "h3": Geometry.h3(0.7)}[kind]
    cfg = Configuration.collinear(mu[:n], spacing)
    states = find_bound_states(geom, cfg)
    count = count_bound_states(geom, cfg)
    assert 1 <= count <= n
    assert count == sum(s.multiplicity for s in states)
    if n >= 2:
        assert states[0].nu > max(cfg.mu)


@settings(max_examples=10, deadline=None)
@given(mu=st.lists(st.floats(0.3, 2.0), min_size=3, max_size=3), k=st.integers(0, 2),
       nu=st.floats(0.1, 3.0))
def test_eigenvalues_decrease_in_mu(mu, k, nu):
    geom, cfg = Geometry.h2(1.0), Configuration.collinear(mu, 1.0)
    bumped = list(mu)
    bumped[k] *= 1.01
    a = symmetric_eigen(principal_matrix(geom, cfg, nu).entries).values
    b = symmetric_eigen(principal_matrix(geom, cfg.with_mu(bumped), nu).entries).values
    assert np.all(b <= a + 1e-15)


def test_mu_bracketing_direction():
    # larger couplings bind more, so replacing every mu_i by the minimum can only lose states
    geom = Geometry.flat3()
    cfg = Configuration.collinear([1.0, 3.0], 0.6)
    low = count_bound_states(geom, cfg.with_mu([1.0, 1.0]))
    high = count_bound_states(geom, cfg.with_mu([3.0, 3.0]))
    assert (low, count_bound_states(geom, cfg), high) == (1, 2, 2)
