import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalrad.covering import (ClaimViolation, all_tau, build_covering, check_good_mass_floor, default_delta,
                               domain_good_mass, find_star_domain, good_set_mass, inradius_cube_size, tau)
from nodalrad.fixtures import box_ground_state, slab
from nodalrad.nodal import decompose
from nodalrad.sampling import from_array, sample
from nodalrad.spectral import random_eigenfunction, torus_eigenvalue, unit_torus

from oracles import cube_masses_oracle


@pytest.fixture(scope="module")
def slab_field():
    return sample(slab(), 32)


@pytest.fixture(scope="module")
def random_field():
    return sample(random_eigenfunction(unit_torus(3), torus_eigenvalue(6), seed=2), 32)


def test_default_delta():
    assert default_delta(3) == pytest.approx(16 * math.sqrt(3))


@pytest.mark.parametrize("delta,m", [(2, 4), (3, 2), (2, 8)])
def test_constant_field_volume_ratio(delta, m):
    f = from_array(np.ones((16, 16, 16)), slab(), normalize=True)
    cov = build_covering(f, m / 16, gamma=1e6, delta=delta)
    assert np.allclose(cov.mass_scaled / cov.mass_inner, delta**3, rtol=1e-12)
    assert np.all(build_covering(f, m / 16, gamma=delta**3, delta=delta).good)
    assert not np.any(build_covering(f, m / 16, gamma=delta**3 * (1 - 1e-9), delta=delta).good)


def test_huge_gamma_marks_everything_good(random_field):
    cov = build_covering(random_field, 1 / 4, gamma=1e12, delta=2)
    assert cov.good.all()
    assert good_set_mass(cov) == pytest.approx(1.0, abs=1e-9)


def test_slab_masses_match_oracle(slab_field):
    cov = build_covering(slab_field, 1 / 8, gamma=2**3 * 1.1, delta=2)
    inner, scaled = cube_masses_oracle(slab_field.values, slab_field.cell_volume, 4, 2, (True,) * 3)
    assert np.allclose(cov.mass_inner, inner, rtol=1e-12, atol=1e-15)
    assert np.allclose(cov.mass_scaled, scaled, rtol=1e-12, atol=1e-15)
    assert np.array_equal(cov.good, (scaled <= cov.gamma * inner) | (inner == 0))


@pytest.mark.parametrize("delta", [1.5, 2.5, 3.0, 5.0])
def test_wrapped_masses_match_oracle(random_field, delta):
    cov = build_covering(random_field, 1 / 4, gamma=10, delta=delta)
    inner, scaled = cube_masses_oracle(random_field.values, random_field.cell_volume, 8, delta, (True,) * 3)
    assert np.allclose(cov.mass_scaled, scaled, rtol=1e-12)
    assert np.allclose(cov.mass_inner, inner, rtol=1e-12)


def test_box_clipping_matches_oracle():
    f = sample(box_ground_state(), 20)
    cov = build_covering(f, 6 / 20, gamma=10, delta=2)
    inner, scaled = cube_masses_oracle(f.values, f.cell_volume, 6, 2, (False,) * 3)
    assert np.allclose(cov.mass_inner, inner, rtol=1e-12)
    assert np.allclose(cov.mass_scaled, scaled, rtol=1e-12)
    # 3 cubes of 6 cells leave a two-cell boundary layer on each axis
    assert np.sum(cov.mass_inner) + cov.boundary_layer_mass == pytest.approx(1.0, abs=1e-12)
    assert cov.boundary_layer_mass > 0


@pytest.mark.parametrize("delta,expect", [(2, 8), (2.5, 27), (3, 27), (1.5, 8)])
def test_kappa_is_ceil_delta_cubed(random_field, delta, expect):
    cov = build_covering(random_field, 1 / 8, gamma=10, delta=delta)
    assert cov.kappa == math.ceil(delta) ** 3 == expect


def test_kappa_bounded_by_ceil_delta(random_field):
    # 1.2 * 4 cells = 4.8 cells: the half-open window catches exactly 4 centres, so no overlap
    cov = build_covering(random_field, 1 / 8, gamma=10, delta=1.2)
    assert cov.kappa == 1 <= math.ceil(1.2) ** 3


def test_alignment_error(random_field):
    with pytest.raises(ValueError, match="cube size must align to grid"):
        build_covering(random_field, 0.1, gamma=10, delta=2)
    with pytest.raises(ValueError, match="cube size must align to grid"):
        build_covering(random_field, 3 / 32, gamma=10, delta=2)


def test_parameter_errors(random_field):
    with pytest.raises(ValueError, match="gamma"):
        build_covering(random_field, 1 / 4, gamma=1.0, delta=2)
    with pytest.raises(ValueError, match="delta"):
        build_covering(random_field, 1 / 4, gamma=2.0, delta=1.0)


def test_partition_closure(random_field):
    cov = build_covering(random_field, 1 / 8, gamma=5, delta=3)
    assert np.sum(cov.mass_inner) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.01, 200.0), st.floats(1.01, 200.0), st.sampled_from([1.5, 2.0, 3.7]))
def test_monotone_in_gamma_and_floor(g1, g2, delta):
    f = sample(random_eigenfunction(unit_torus(3), torus_eigenvalue(6), seed=2), 32)
    lo, hi = sorted((g1, g2))
    a = build_covering(f, 1 / 8, gamma=lo, delta=delta)
    b = a.with_gamma(hi)
    assert np.all(b.good[a.good])
    assert b.good_mass >= a.good_mass
    for cov in (a, b):
        assert 0 <= cov.good_mass <= 1 + 1e-12
        assert check_good_mass_floor(cov) >= -1e-9


def test_floor_vacuous_when_gamma_small(random_field):
    cov = build_covering(random_field, 1 / 8, gamma=2.0, delta=3)
    assert cov.good_mass_floor <= 0
    assert 0 <= cov.good_mass <= 1


def test_floor_violation_raises(random_field):
    cov = build_covering(random_field, 1 / 8, gamma=4, delta=2)
    broken = replace(cov, good_mass=cov.good_mass_floor - 1e-6)
    with pytest.raises(ClaimViolation, match="good-mass floor violated"):
        check_good_mass_floor(broken)


def test_tau_all_good_and_none_good(random_field):
    dec = decompose(random_field)
    cov = build_covering(random_field, 1 / 4, gamma=1e12, delta=2)
    assert all(v == pytest.approx(1.0) for v in all_tau(cov, dec).values())
    none = replace(cov, good=np.zeros_like(cov.good))
    assert tau(none, dec, 1) == 0.0


def test_tau_on_half_good_slab(slab_field):
    dec = decompose(slab_field)
    cov = build_covering(slab_field, 1 / 8, gamma=1e12, delta=2)
    good = np.zeros_like(cov.good)
    good[:, :4, :] = True  # half the cubes in y
    half = replace(cov, good=good)
    cells = np.zeros(slab_field.values.shape, bool)
    cells[:, :16, :] = True
    for d in dec.domains:
        in_dom = dec.labels == d.label
        want = np.sum(slab_field.values[in_dom & cells] ** 2) / np.sum(slab_field.values[in_dom] ** 2)
        assert tau(half, dec, d.label) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(0.5, abs=1e-12)


def test_domain_good_mass_sums_to_good_mass(random_field):
    dec = decompose(random_field)
    cov = build_covering(random_field, 1 / 8, gamma=6, delta=2)
    assert np.sum(domain_good_mass(cov, dec)) == pytest.approx(cov.good_mass, abs=1e-12)


def test_star_domain_all_good_and_slab_tie(random_field, slab_field):
    dec = decompose(random_field)
    cov = build_covering(random_field, 1 / 4, gamma=1e12, delta=2)
    heaviest = max(dec.domains, key=lambda d: (d.l2_mass, -d.label))
    assert find_star_domain(cov, dec) == heaviest.label
    sdec = decompose(slab_field)
    scov = build_covering(slab_field, 1 / 8, gamma=1e12, delta=2)
    assert find_star_domain(scov, sdec) == 1


def test_star_domain_missing(random_field):
    dec = decompose(random_field)
    cov = build_covering(random_field, 1 / 4, gamma=8, delta=2)
    none = replace(cov, good=np.zeros_like(cov.good))
    assert find_star_domain(replace(none, gamma=1.5), dec) is None
    with pytest.raises(ClaimViolation, match="star domain missing"):
        find_star_domain(replace(none, gamma=4 * cov.kappa), dec)


def test_four_kappa_rule(random_field):
    cov = build_covering(random_field, 1 / 4, delta=2, gamma_rule="4kappa")
    assert cov.gamma == 4 * cov.kappa == 32
    assert cov.good_mass >= 0.75


def test_inradius_cube_rule(slab_field):
    dec = decompose(slab_field)
    # 8 * 0.25 exceeds the side, so the cube is the whole torus
    assert inradius_cube_size(slab_field, dec) == 1.0
    # 2 * 0.25 = 0.5 = 16 cells, which tiles 32
    assert inradius_cube_size(slab_field, dec, factor=2) == 0.5
    # 1.2 * 0.25 = 0.3 -> 9.6 cells, snapped up to 16 (first divisor of 32 above)
    assert inradius_cube_size(slab_field, dec, factor=1.2) == 0.5


def test_csv_and_header(tmp_path, random_field):
    cov = build_covering(random_field, 1 / 4, delta=2, gamma_rule="4kappa")
    cov.to_csv(tmp_path / "c.csv", tmp_path / "c.json")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["i0", "i1", "i2", "mass_inner", "mass_scaled", "good"]
    assert len(rows) == 1 + 64
    head = json.loads((tmp_path / "c.json").read_text())
    assert head["kappa_delta"] == cov.kappa and head["schema_version"] == 1
    assert head["good_mass"] == cov.good_mass
