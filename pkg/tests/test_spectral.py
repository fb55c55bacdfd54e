import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalrad.spectral import (BOX, TORUS, EigenfunctionSpec, ManifoldSpec, Mode, enumerate_eigenspace,
                               evaluate, random_eigenfunction, single_mode, torus_eigenvalue, unit_box,
                               unit_torus)

from oracles import eigenspace_bruteforce, evaluate_mp


def test_unit_vectors_span_first_torus_eigenspace():
    ks = enumerate_eigenspace(unit_torus(3), 4 * math.pi**2, 0.0)
    assert ks == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_box_ground_state_is_simple():
    assert enumerate_eigenspace(unit_box(3), 3 * math.pi**2, 0.0) == [(1, 1, 1)]


@pytest.mark.parametrize("k2", [1, 2, 3, 6, 9, 14, 21])
def test_eigenspace_matches_exhaustive_search(k2):
    assert enumerate_eigenspace(unit_torus(3), torus_eigenvalue(k2)) == eigenspace_bruteforce(k2)


def test_eigenspace_frozen_counts():
    # frozen from the exhaustive-search oracle: (3,0,0) and (2,2,1) families give 30 vectors, 15 up to sign
    assert len(enumerate_eigenspace(unit_torus(3), torus_eigenvalue(9))) == 15
    assert len(enumerate_eigenspace(unit_torus(3), torus_eigenvalue(6))) == 12


def test_box_eigenspace_matches_search():
    lam = math.pi**2 * 14
    assert enumerate_eigenspace(unit_box(3), lam) == eigenspace_bruteforce(14, kind="box")


def test_window_collects_neighbouring_shells():
    m = unit_torus(3)
    ks = enumerate_eigenspace(m, torus_eigenvalue(2), torus_eigenvalue(1) * 1.01)
    sq = sorted({sum(v * v for v in k) for k in ks})
    assert sq == [1, 2, 3]


def test_empty_eigenspace_is_not_an_error():
    assert enumerate_eigenspace(unit_torus(3), torus_eigenvalue(7)) == []
    with pytest.raises(ValueError, match="lam_window"):
        enumerate_eigenspace(unit_torus(3), 1.0, -1.0)


def test_random_eigenfunction_seeded():
    m = unit_torus(3)
    a = random_eigenfunction(m, torus_eigenvalue(6), seed=7)
    b = random_eigenfunction(m, torus_eigenvalue(6), seed=7)
    assert a.dumps() == b.dumps()
    assert np.array_equal(a.coefficients, b.coefficients)
    c = random_eigenfunction(m, torus_eigenvalue(6), seed=8)
    assert not np.array_equal(a.coefficients, c.coefficients)


def test_random_eigenfunction_covers_eigenspace():
    m = unit_torus(3)
    spec = random_eigenfunction(m, torus_eigenvalue(6), seed=1)
    assert [md.k for md in spec.modes] == enumerate_eigenspace(m, torus_eigenvalue(6))
    assert spec.coefficients.shape == (12, 2)


def test_random_eigenfunction_single_mode():
    spec = random_eigenfunction(unit_box(3), 3 * math.pi**2, seed=3)
    assert [md.k for md in spec.modes] == [(1, 1, 1)]


def test_random_eigenfunction_empty():
    with pytest.raises(ValueError, match="no modes at target eigenvalue"):
        random_eigenfunction(unit_torus(3), torus_eigenvalue(7), seed=0)


def test_random_eigenfunction_picks_nearest_shell():
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(2) + 1.0, torus_eigenvalue(1) * 2, seed=0)
    assert spec.eigenvalue == pytest.approx(torus_eigenvalue(2))


def test_point_values():
    slab = single_mode(unit_torus(3), (1, 0, 0), sin=1.0)
    assert evaluate(slab, (0.25, 0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    ground = single_mode(unit_box(3), (1, 1, 1), cos=1.0)
    assert evaluate(ground, (0.5, 0.5, 0.5)) == pytest.approx(1.0, abs=1e-15)


def test_box_rejects_outside_points():
    ground = single_mode(unit_box(3), (1, 1, 1), cos=1.0)
    with pytest.raises(ValueError, match="point outside manifold"):
        evaluate(ground, (1.2, 0.5, 0.5))


def test_matches_high_precision_evaluation():
    L = (1.0, 1.3, 0.7)
    m = ManifoldSpec(TORUS, L)
    lam = m.mode_eigenvalue((1, 0, 0))
    spec = EigenfunctionSpec(m, (Mode((1, 0, 0), 0.3, -1.1), Mode((-1, 0, 0), 0.7, 0.25)), lam)
    rng = np.random.default_rng(11)
    pts = rng.random((10, 3)) * np.array(L)
    for p in pts:
        want = evaluate_mp([(md.k, md.cos, md.sin) for md in spec.modes], p, L)
        assert evaluate(spec, p) == pytest.approx(want, abs=1e-13)


def test_random_field_matches_high_precision_evaluation():
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(14), seed=5)
    rng = np.random.default_rng(2)
    for p in rng.random((10, 3)):
        want = evaluate_mp([(md.k, md.cos, md.sin) for md in spec.modes], p, (1, 1, 1))
        assert evaluate(spec, p) == pytest.approx(want, abs=1e-12)


def test_grid_evaluation_agrees_with_pointwise():
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(5), seed=2)
    axes = [np.linspace(0, 1, 5), np.linspace(0.1, 0.9, 4), np.array([0.3, 0.77])]
    grid = spec.evaluate_grid(axes)
    for i, j, k in np.ndindex(grid.shape):
        assert grid[i, j, k] == pytest.approx(evaluate(spec, (axes[0][i], axes[1][j], axes[2][k])), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(0, 2), st.integers(-2, 2))
def test_torus_periodicity(x, axis, shift):
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(3), seed=4)
    y = list(x)
    y[axis] += shift
    assert evaluate(spec, y) == pytest.approx(evaluate(spec, x), abs=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 4.0), st.sampled_from([(1, 0, 0), (1, 2, 0), (2, 1, 1)]))
def test_eigenvalue_homogeneity(s, k):
    a = ManifoldSpec(TORUS, (1.0, 1.5, 0.8))
    b = ManifoldSpec(TORUS, tuple(s * v for v in a.side_lengths))
    assert b.mode_eigenvalue(k) == pytest.approx(a.mode_eigenvalue(k) / s**2, rel=1e-13)


def test_finite_difference_laplacian_residual():
    # second-order stencil: |Lap_h phi + lam phi| <= K lam^2 h^2 |phi|_inf with K < 1
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(6), seed=0)
    N = 48
    h = 1.0 / N
    ax = (np.arange(N) + 0.5) * h
    phi = spec.evaluate_grid([ax, ax, ax])
    lap = sum(np.roll(phi, 1, a) + np.roll(phi, -1, a) - 2 * phi for a in range(3)) / h**2
    lam = spec.eigenvalue
    K = np.max(np.abs(lap + lam * phi)) / (lam**2 * h**2 * np.max(np.abs(phi)))
    assert K < 1


def test_spec_validation():
    m = unit_torus(3)
    with pytest.raises(ValueError, match="expected"):
        EigenfunctionSpec(m, (Mode((1, 0, 0), 1.0), Mode((1, 1, 0), 1.0)), torus_eigenvalue(1))
    with pytest.raises(ValueError, match="coefficients are zero"):
        EigenfunctionSpec(m, (Mode((1, 0, 0), 0.0),), torus_eigenvalue(1))
    with pytest.raises(ValueError, match="admissible"):
        EigenfunctionSpec(unit_box(3), (Mode((0, 1, 1), 1.0),), 2 * math.pi**2)
    with pytest.raises(ValueError):
        ManifoldSpec(TORUS, (1.0,) * 4)
    with pytest.raises(ValueError):
        ManifoldSpec(BOX, (1.0, -1.0))


def test_serialisation_round_trip_is_exact():
    spec = random_eigenfunction(unit_torus(3), torus_eigenvalue(11), seed=9)
    back = EigenfunctionSpec.loads(spec.dumps())
    assert back == spec
    assert back.dumps() == spec.dumps()
    assert set(json.loads(spec.dumps())) == {"manifold", "modes", "coefficients", "lambda", "seed"}


def test_deserialisation_names_bad_key():
    d = json.loads(random_eigenfunction(unit_torus(3), torus_eigenvalue(2), seed=0).dumps())
    del d["coefficients"]
    with pytest.raises(KeyError, match="coefficients"):
        EigenfunctionSpec.from_dict(d)
    d = json.loads(random_eigenfunction(unit_torus(3), torus_eigenvalue(2), seed=0).dumps())
    d["manifold"] = {"kind": "sphere", "side_lengths": [1, 1, 1]}
    with pytest.raises(ValueError, match="manifold"):
        EigenfunctionSpec.from_dict(d)
