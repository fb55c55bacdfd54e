"""Per-eigenfunction inequality checks and ensemble scaling regressions."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy import stats

from .covering import CubeCovering, all_tau
from .nodal import NodalDecomposition
from .sampling import SampledField

SCHEMA_VERSION = 1
TAU_FLOOR = 0.25
TAU_SLACK = 0.02


@dataclass
class DomainRow:
    label: int
    sign: int
    volume: float
    l2_mass: float
    inradius: float
    inradius_error: float
    upper_ratio: float  # inradius * sqrt(lambda)
    tau: float
    gamma: float
    kappa: int
    good_mass_bound_rhs_over_C: float | None
    good_mass_bound_ratio: float | None
    l2_mass_bound_rhs_over_C: float
    l2_mass_bound_ratio: float
    l2_mass_bound_gamma: float
    l2_mass_bound_tau: float
    l2_mass_bound_ok: bool
    rayleigh_quotient: float | None = None
    special_cube_quotient: float | None = None
    special_cube_rhs: float | None = None
    flags: list[str] = dc_field(default_factory=list)


@dataclass
class BoundsReport:
    spec_name: str
    lam: float
    dimension: int
    resolution: list[int]
    h: float
    delta: float
    gamma: float
    kappa: int
    rows: list[DomainRow]
    fat_domain_label: int
    fat_domain_inradius: float
    sum_power_statistic: float | None
    star_domain: int | None
    good_mass: float
    good_mass_floor: float
    good_mass_margin: float
    checks: dict = dc_field(default_factory=dict)
    extras: dict = dc_field(default_factory=dict)
    timestamp: str | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self, include_timestamp: bool = True) -> str:
        d = self.to_dict()
        if not include_timestamp:
            d.pop("timestamp")
        return json.dumps(_clean(d), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "BoundsReport":
        d = dict(d)
        d.pop("schema_version", None)
        d["rows"] = [DomainRow(**r) for r in d["rows"]]
        return cls(**d)

    def to_csv(self, path) -> None:
        names = [f for f in DomainRow.__dataclass_fields__]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["spec", "lambda"] + names)
            for r in self.rows:
                rd = asdict(r)
                rd["flags"] = ";".join(rd["flags"])
                w.writerow([self.spec_name, repr(self.lam)] + [_fmt(rd[k]) for k in names])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def good_mass_bound_rhs_over_C(gamma: float, tau: float, lam: float, n: int) -> float:
    return gamma ** ((2 - n) / n) * math.sqrt(tau) / math.sqrt(lam)


def l2_mass_bound_rhs_over_C(l2_mass: float, lam: float, n: int) -> float:
    # ||phi||_{L2(Omega)}^{2(n-2)/n} with l2_mass = ||phi||^2
    return l2_mass ** ((n - 2) / n) / math.sqrt(lam)


def verify_good_mass_bound(field: SampledField, decomposition: NodalDecomposition,
                       covering: CubeCovering) -> list[dict]:
    """Ratio inradius * sqrt(lambda) * gamma^((n-2)/n) / sqrt(tau) per domain; tau = 0 rows are flagged."""
    n = field.dimension
    lam = field.eigenvalue
    taus = all_tau(covering, decomposition)
    out = []
    for d in decomposition.domains:
        t = taus.get(d.label, 0.0)
        if t > 0:
            rhs = good_mass_bound_rhs_over_C(covering.gamma, t, lam, n)
            out.append({"label": d.label, "tau": t, "rhs_over_C": rhs, "ratio": d.inradius / rhs, "flag": None})
        else:
            out.append({"label": d.label, "tau": t, "rhs_over_C": None, "ratio": None, "flag": "tau=0"})
    return out


def verify_l2_mass_bound(decomposition: NodalDecomposition, covering: CubeCovering) -> list[dict]:
    """Ratio inradius * sqrt(lambda) / l2_mass^((n-2)/n) with gamma tailored to each domain.

    gamma_D = 4 kappa / l2_mass(D); tau is recomputed under gamma_D and domains
    with tau < 1/4 - 0.02 are flagged.
    """
    f = decomposition.field
    n = f.dimension
    lam = f.eigenvalue
    out = []
    cache: dict[float, dict[int, float]] = {}
    for d in decomposition.domains:
        g = 4.0 * covering.kappa / d.l2_mass if d.l2_mass > 0 else math.inf
        if g not in cache:
            cache[g] = all_tau(covering.with_gamma(g), decomposition) if math.isfinite(g) else {}
        t = cache[g].get(d.label, 0.0)
        rhs = l2_mass_bound_rhs_over_C(d.l2_mass, lam, n)
        ok = t >= TAU_FLOOR - TAU_SLACK
        out.append({"label": d.label, "gamma": g, "tau": t, "rhs_over_C": rhs,
                    "ratio": d.inradius / rhs if rhs > 0 else math.nan, "ok": ok})
    return out


def l2_bound_from_good_mass_bound(ratio: float, tau: float, kappa: int, n: int) -> float:
    """Mass-tailored bound ratio implied by the good-mass bound ratio at gamma = 4 kappa / l2_mass."""
    return ratio * math.sqrt(tau) / (4.0 * kappa) ** ((n - 2) / n)


def verify_sum_inequality(decomposition: NodalDecomposition, lam: float | None = None) -> float:
    """Sum over domains of inradius^(2n/(n-2))."""
    n = decomposition.field.dimension
    if n == 2:
        raise ValueError("summation exponent undefined for n = 2")
    p = 2 * n / (n - 2)
    return float(math.fsum(d.inradius**p for d in decomposition.domains))


@dataclass
class ScalingSummary:
    slope: float
    intercept: float
    residual: float
    ci_low: float
    ci_high: float
    n_points: int
    C1: float
    C2: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        d["C2_over_C1"] = self.C2 / self.C1 if self.C1 > 0 else None
        return _clean(d)


def loglog_fit(lams, values, confidence: float = 0.95) -> tuple[float, float, float, float, float]:
    """Least-squares slope of log(values) on log(lams): (slope, intercept, rms residual, ci_low, ci_high)."""
    x = np.log(np.asarray(lams, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    fit = stats.linregress(x, y)
    resid = y - (fit.intercept + fit.slope * x)
    rms = float(np.sqrt(np.mean(resid**2)))
    if len(x) > 2:
        t = stats.t.ppf(0.5 + confidence / 2, len(x) - 2)
        half = t * fit.stderr
    else:
        half = math.nan
    return float(fit.slope), float(fit.intercept), rms, float(fit.slope - half), float(fit.slope + half)


def _check_span(lams, min_points: int = 8):
    distinct = sorted(set(float(v) for v in lams))
    if len(distinct) < min_points or distinct[-1] < 10 * distinct[0] * (1 - 1e-12):
        raise ValueError("need ≥ one decade of λ")


def ensemble_maxima(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Per-eigenvalue maximum of the paired values, eigenvalues ascending."""
    best: dict[float, float] = {}
    for lam, v in pairs:
        best[lam] = max(v, best.get(lam, -math.inf))
    lams = np.array(sorted(best))
    return lams, np.array([best[l] for l in lams])


def verify_fat_domain_scaling(reports) -> ScalingSummary:
    """Slope of log(fat-domain inradius) against log(lambda), fitted on per-eigenvalue maxima.

    ``reports`` holds BoundsReports or (lambda, fat inradius) pairs.
    """
    pairs = [(r.lam, r.fat_domain_inradius) if isinstance(r, BoundsReport) else (float(r[0]), float(r[1]))
             for r in reports]
    _check_span([p[0] for p in pairs])
    lams, fat = ensemble_maxima(pairs)
    slope, icpt, res, lo, hi = loglog_fit(lams, fat)
    products = [v * math.sqrt(l) for l, v in pairs]
    return ScalingSummary(slope, icpt, res, lo, hi, len(lams), min(products), max(products))


def sum_inequality_scaling(reports) -> ScalingSummary:
    """Slope of log(sum of inradius^(2n/(n-2))) against log(lambda), on per-eigenvalue maxima."""
    pairs = [(r.lam, r.sum_power_statistic) if isinstance(r, BoundsReport) else (float(r[0]), float(r[1]))
             for r in reports]
    if any(v is None for _, v in pairs):
        raise ValueError("summation exponent undefined for n = 2")
    _check_span([p[0] for p in pairs])
    lams, vals = ensemble_maxima(pairs)
    slope, icpt, res, lo, hi = loglog_fit(lams, vals)
    return ScalingSummary(slope, icpt, res, lo, hi, len(lams), float(np.min(vals)), float(np.max(vals)))


def bound_constant_stability(reports) -> dict:
    """Per-eigenvalue minimum of the good-mass bound ratio and its trend across eigenvalues."""
    best: dict[float, float] = {}
    for r in reports:
        vals = [row.good_mass_bound_ratio for row in r.rows if row.good_mass_bound_ratio is not None]
        if vals:
            best[r.lam] = min(min(vals), best.get(r.lam, math.inf))
    lams = np.array(sorted(best))
    mins = np.array([best[l] for l in lams])
    out = {"lambdas": lams.tolist(), "min_ratio": mins.tolist(), "C": float(mins.min()),
           "max_over_min": float(mins.max() / mins.min())}
    if len(lams) >= 3:
        kt = stats.kendalltau(lams, mins)
        slope = loglog_fit(lams, mins)[0]
        out.update({"kendall_tau": float(kt.statistic), "kendall_p": float(kt.pvalue), "loglog_slope": slope})
    return out
