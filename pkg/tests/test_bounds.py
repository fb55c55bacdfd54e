import csv
import json
import math

import numpy as np
import pytest

from nodalrad import bounds
from nodalrad.covering import all_tau, build_covering
from nodalrad.fixtures import checkerboard, slab
from nodalrad.nodal import decompose
from nodalrad.sampling import sample
from nodalrad.spectral import random_eigenfunction, torus_eigenvalue, unit_torus


@pytest.fixture(scope="module")
def slab_setup():
    f = sample(slab(), 32)
    dec = decompose(f)
    return f, dec, build_covering(f, 1 / 4, gamma=1e6, delta=2)


def test_slab_good_mass_bound_ratio(slab_setup):
    f, dec, cov = slab_setup
    rows = bounds.verify_good_mass_bound(f, dec, cov)
    for r in rows:
        assert r["tau"] == pytest.approx(1.0)
        assert r["ratio"] == pytest.approx(0.25 * 2 * math.pi * cov.gamma ** (1 / 3), rel=1e-12)


def test_bound_formulas_reduce():
    lam = 123.0
    assert bounds.good_mass_bound_rhs_over_C(1.0, 1.0, lam, 3) == pytest.approx(1 / math.sqrt(lam))
    assert bounds.l2_mass_bound_rhs_over_C(1.0, lam, 3) == pytest.approx(1 / math.sqrt(lam))


def test_tau_zero_rows_flagged(slab_setup):
    from dataclasses import replace
    f, dec, cov = slab_setup
    rows = bounds.verify_good_mass_bound(f, dec, replace(cov, good=np.zeros_like(cov.good)))
    assert all(r["flag"] == "tau=0" and r["ratio"] is None for r in rows)


def test_l2_bound_symmetric_on_slab(slab_setup):
    f, dec, cov = slab_setup
    rows = bounds.verify_l2_mass_bound(dec, cov)
    assert rows[0]["ratio"] == pytest.approx(rows[1]["ratio"], rel=1e-12)
    assert rows[0]["gamma"] == pytest.approx(4 * cov.kappa / 0.5, rel=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_tailored_gamma_keeps_a_quarter(seed):
    f = sample(random_eigenfunction(unit_torus(3), torus_eigenvalue(5), seed=seed), 32)
    dec = decompose(f)
    cov = build_covering(f, 1 / 4, delta=2, gamma_rule="4kappa")
    assert cov.good_mass_margin > 0
    for r in bounds.verify_l2_mass_bound(dec, cov):
        assert r["tau"] >= 0.25 - 0.02
        assert r["ok"]


def test_l2_bound_derivable_from_good_mass_bound():
    f = sample(random_eigenfunction(unit_torus(3), torus_eigenvalue(6), seed=1), 32)
    dec = decompose(f)
    cov = build_covering(f, 1 / 4, delta=2, gamma_rule="4kappa")
    for d, c in zip(dec.domains, bounds.verify_l2_mass_bound(dec, cov)):
        tailored = cov.with_gamma(c["gamma"])
        t = all_tau(tailored, dec)[d.label]
        thm = [r for r in bounds.verify_good_mass_bound(f, dec, tailored) if r["label"] == d.label][0]
        # with gamma = 4 kappa / mass the good-mass ratio times sqrt(tau) / (4 kappa)^((n-2)/n) is the tailored ratio
        implied = bounds.l2_bound_from_good_mass_bound(thm["ratio"], t, cov.kappa, 3)
        assert implied == pytest.approx(c["ratio"], rel=0.01)


def test_sum_statistic_on_slab(slab_setup):
    f, dec, cov = slab_setup
    assert bounds.verify_sum_inequality(dec) == pytest.approx(2 * 0.25**6, rel=1e-12)


def test_sum_statistic_undefined_in_2d():
    dec = decompose(sample(checkerboard(), 16))
    with pytest.raises(ValueError, match="summation exponent undefined for n = 2"):
        bounds.verify_sum_inequality(dec)


def test_fat_scaling_exact_synthetic():
    lams = np.geomspace(50, 2000, 10)
    s = bounds.verify_fat_domain_scaling([(l, l**-0.5) for l in lams])
    assert s.slope == pytest.approx(-0.5, abs=1e-12)
    assert s.residual == pytest.approx(0.0, abs=1e-12)
    assert s.C1 == pytest.approx(1.0) and s.C2 == pytest.approx(1.0)
    assert s.to_dict()["C2_over_C1"] == pytest.approx(1.0)


def test_fat_scaling_uses_per_lambda_maxima():
    pairs = []
    for l in np.geomspace(50, 2000, 9):
        pairs += [(l, 2 * l**-0.5), (l, 0.5 * l**-0.5)]
    s = bounds.verify_fat_domain_scaling(pairs)
    assert s.slope == pytest.approx(-0.5, abs=1e-12)
    assert (s.C1, s.C2) == pytest.approx((0.5, 2.0))


@pytest.mark.parametrize("lams", [np.geomspace(50, 400, 10), [50, 600], np.geomspace(50, 2000, 5)])
def test_span_refusal(lams):
    with pytest.raises(ValueError, match="need ≥ one decade of λ"):
        bounds.verify_fat_domain_scaling([(l, 1.0) for l in lams])


def test_confidence_interval_brackets_slope():
    rng = np.random.default_rng(0)
    lams = np.geomspace(100, 1000, 12)
    vals = lams**-0.5 * np.exp(rng.normal(0, 0.05, lams.size))
    slope, _, res, lo, hi = bounds.loglog_fit(lams, vals)
    assert lo < slope < hi and res > 0


def test_bound_constant_stability_summary():
    class R:
        def __init__(self, lam, ratios):
            self.lam = lam
            self.rows = [type("row", (), {"good_mass_bound_ratio": v}) for v in ratios]
    reps = [R(l, [3.0 + 0.01 * i, None, 5.0]) for i, l in enumerate(np.geomspace(100, 1000, 8))]
    out = bounds.bound_constant_stability(reps)
    assert out["C"] == pytest.approx(3.0)
    assert out["max_over_min"] == pytest.approx(3.07 / 3.0)
    assert out["kendall_tau"] == pytest.approx(1.0)


def _report():
    row = bounds.DomainRow(1, 1, 0.5, 0.5, 0.25, 0.02, 1.57, 1.0, 32.0, 8, 0.1, 2.5, 0.1, 2.5, 512.0, 1.0, True,
                           39.0, 40.0, 300.0, [])
    return bounds.BoundsReport("x", 39.47, 3, [32, 32, 32], 0.25, 2.0, 32.0, 8, [row], 1, 0.25, 2 * 0.25**6,
                               1, 1.0, 0.75, 0.25, {"good_mass_floor": True}, {"note": float("nan")}, "t")


def test_report_json_round_trip():
    rep = _report()
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] == 1
    assert doc["extras"]["note"] is None
    back = bounds.BoundsReport.from_dict(doc)
    assert back.rows[0] == rep.rows[0]
    assert "timestamp" not in json.loads(rep.to_json(include_timestamp=False))
    assert rep.passed


def test_report_csv(tmp_path):
    _report().to_csv(tmp_path / "b.csv")
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0][:4] == ["spec", "lambda", "label", "sign"]
    assert len(rows) == 2
