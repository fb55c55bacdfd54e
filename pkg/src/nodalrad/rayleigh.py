"""Local Rayleigh quotients, the special good cube, asymmetry and mean-value defects."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .covering import ClaimViolation, CubeCovering, contract, domain_good_mass
from .nodal import NodalDecomposition
from .sampling import SampledField, energy_density

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LocalRayleigh:
    cube: tuple[int, ...] | None
    numerator: float
    denominator: float
    quotient: float

    @property
    def defined(self) -> bool:
        return self.denominator > 0


@dataclass(frozen=True)
class SpecialCube:
    label: int
    cube: tuple[int, ...]
    quotient: float
    rhs: float
    lambda1: float
    tau: float
    kappa: int
    positive_fraction: float
    negative_fraction: float
    nodal_point: tuple[float, ...] | None
    mean_value_defect: float | None

    @property
    def margin(self) -> float:
        return self.rhs - self.quotient

    def to_json(self) -> str:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        d["quotient_bound"] = d.pop("rhs")
        d["margin"] = self.margin
        d["cube"] = list(self.cube)
        d["asymmetry"] = [self.positive_fraction, self.negative_fraction]
        if self.nodal_point is not None:
            d["nodal_point"] = list(self.nodal_point)
        return json.dumps(d, indent=1, sort_keys=True) + "\n"


def _domain_arrays(decomposition: NodalDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell energy and mass of every zero-extended domain, cached on the decomposition."""
    cache = decomposition.__dict__.setdefault("_rayleigh_cache", {})
    if "arrays" not in cache:
        f = decomposition.field
        e = energy_density(f, labels=decomposition.labels)
        m = np.where(decomposition.labels > 0, f.values * f.values * f.cell_volume, 0.0)
        cache["arrays"] = (e, m)
    return cache["arrays"]


def _region_sum(arr: np.ndarray, region) -> float:
    if region is None:
        return float(np.sum(arr))
    if isinstance(region, np.ndarray) and region.dtype == bool:
        return float(np.sum(arr[region]))
    return float(np.sum(arr[np.ix_(*region)]))


def local_rayleigh(field: SampledField, decomposition: NodalDecomposition, label: int, region=None,
                   cube: tuple[int, ...] | None = None) -> LocalRayleigh:
    """Rayleigh quotient of the zero-extended domain restriction over ``region``.

    ``region`` is None (whole grid), a boolean cell mask, or per-axis index arrays
    as returned by ``CubeCovering.cube_region`` (repeated indices count repeatedly).
    """
    e, m = _domain_arrays(decomposition)
    sel = decomposition.labels == label
    num = _region_sum(np.where(sel, e, 0.0), region)
    den = _region_sum(np.where(sel, m, 0.0), region)
    q = num / den if den > 0 else math.nan
    return LocalRayleigh(cube, num, den, q)


def domain_quotient(decomposition: NodalDecomposition, label: int) -> float:
    """Discrete first Dirichlet eigenvalue estimate: Rayleigh quotient of the whole zero extension."""
    return local_rayleigh(decomposition.field, decomposition, label).quotient


def all_domain_quotients(decomposition: NodalDecomposition) -> dict[int, float]:
    e, m = _domain_arrays(decomposition)
    k = len(decomposition.domains) + 1
    num = np.bincount(decomposition.labels.ravel(), weights=e.ravel(), minlength=k)
    den = np.bincount(decomposition.labels.ravel(), weights=m.ravel(), minlength=k)
    return {lab: float(num[lab] / den[lab]) for lab in range(1, k) if den[lab] > 0}


def cube_quotients(decomposition: NodalDecomposition, label: int, covering: CubeCovering,
                   scaled: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Numerators and denominators over every (scaled) cube of the covering."""
    e, m = _domain_arrays(decomposition)
    sel = decomposition.labels == label
    mats = covering.scaled_weights if scaled else covering.inner_weights
    return contract(np.where(sel, e, 0.0), mats), contract(np.where(sel, m, 0.0), mats)


def aggregate_quotient(decomposition: NodalDecomposition, label: int, covering: CubeCovering) -> float:
    """Mass-weighted mean of the inner-cube quotients, i.e. sum of numerators over sum of denominators."""
    num, den = cube_quotients(decomposition, label, covering, scaled=False)
    return float(np.sum(num) / np.sum(den))


def asymmetry(field: SampledField, region) -> tuple[float, float]:
    """Fractions of strictly positive and strictly negative cells in ``region`` (with multiplicity)."""
    if isinstance(region, np.ndarray) and region.dtype == bool:
        vals = field.values[region]
    else:
        vals = field.values[np.ix_(*region)]
    if vals.size == 0:
        raise ValueError("empty region")
    return float(np.count_nonzero(vals > 0)) / vals.size, float(np.count_nonzero(vals < 0)) / vals.size


def cube_asymmetry(covering: CubeCovering, cube) -> tuple[float, float]:
    """Positive and negative cell fractions of a scaled cube, counting wrapped cells with multiplicity."""
    mats = [W[a:a + 1] for W, a in zip(covering.scaled_weights, cube)]
    phi = covering.field.values
    total = float(contract(np.ones(phi.shape), mats).item())
    pos = float(contract((phi > 0).astype(float), mats).item())
    neg = float(contract((phi < 0).astype(float), mats).item())
    return pos / total, neg / total


def find_nodal_point(field: SampledField, region_cells: tuple[np.ndarray, ...], near=None):
    """A zero of the analytic field on a grid edge inside a box of cells.

    ``region_cells`` gives per-axis (possibly wrapping) index arrays; the edge whose
    midpoint is closest to ``near`` (default: the box centre) is refined by bisection.
    Returns None when no edge in the box changes sign.
    """
    idx = [np.unique(a) for a in region_cells]
    vals = field.values[np.ix_(*idx)]
    h = np.array(field.spacing)
    if near is None:
        near = np.array([np.mean(a) + 0.5 for a in region_cells]) * h
    best = None
    for axis in range(vals.ndim):
        a = np.take(vals, range(vals.shape[axis] - 1), axis=axis)
        b = np.take(vals, range(1, vals.shape[axis]), axis=axis)
        change = np.argwhere(a * b < 0)
        for c in change:
            p = np.array([idx[i][c[i]] for i in range(vals.ndim)], dtype=float)
            q = p.copy()
            q[axis] = idx[axis][c[axis] + 1]
            if abs(q[axis] - p[axis]) != 1:
                continue
            mid = (p + q + 1) / 2 * h
            dist = float(np.sum((mid - near) ** 2))
            if best is None or dist < best[0]:
                best = (dist, (p + 0.5) * h, (q + 0.5) * h)
    if best is None:
        return None
    return _root_on_segment(field, best[1], best[2])


def _root_on_segment(field: SampledField, x0, x1) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    g = lambda t: field.spec.evaluate(x0 + t * (x1 - x0))
    t = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return x0 + t * (x1 - x0)


def nodal_points(field: SampledField, count: int, rng: np.random.Generator) -> np.ndarray:
    """Zeros of the analytic field on randomly chosen sign-changing grid edges."""
    phi = field.values
    edges = []
    for axis in range(phi.ndim):
        q = np.roll(phi, -1, axis=axis)
        cells = np.argwhere(phi * q < 0)
        if not field.periodic[axis]:
            cells = cells[cells[:, axis] < phi.shape[axis] - 1]
        edges.extend((tuple(c), axis) for c in cells)
    if not edges:
        return np.empty((0, phi.ndim))
    pick = rng.choice(len(edges), size=min(count, len(edges)), replace=False)
    h = np.array(field.spacing)
    pts = []
    for i in sorted(pick):
        c, axis = edges[i]
        p = (np.array(c, dtype=float) + 0.5) * h
        q = p.copy()
        q[axis] += h[axis]
        pts.append(_root_on_segment(field, p, q))
    return np.array(pts)


MEAN_VALUE_CELLS = 8


def quadrature_subdivision(field: SampledField, radius: float, cells_per_radius: int = MEAN_VALUE_CELLS) -> int:
    """Sub-cells per cell edge needed to put ``cells_per_radius`` quadrature points across a radius."""
    return max(1, math.ceil(cells_per_radius * max(field.spacing) / radius - 1e-9))


def _ball_values(field: SampledField, point, radius: float, sub: int = 1) -> np.ndarray:
    """Values at the quadrature points of a ball, each standing for cell_volume / sub**n.

    ``sub == 1`` uses the stored cell values; finer subdivisions evaluate the
    normalised analytic field at sub-cell centres.
    """
    h = np.array(field.spacing) / sub
    res = np.array(field.resolution) * sub
    point = np.asarray(point, dtype=float)
    lo = np.floor((point - radius) / h - 0.5).astype(int)
    hi = np.ceil((point + radius) / h - 0.5).astype(int)
    axes_idx, axes_d2, axes_x = [], [], []
    for i in range(len(res)):
        j = np.arange(lo[i], hi[i] + 1)
        d = (j + 0.5) * h[i] - point[i]
        if field.periodic[i]:
            j = j % res[i]
        else:
            keep = (j >= 0) & (j < res[i])
            j, d = j[keep], d[keep]
        axes_idx.append(j)
        axes_d2.append(d * d)
        axes_x.append((j + 0.5) * h[i])
    d2 = axes_d2[0]
    for extra in axes_d2[1:]:
        d2 = np.add.outer(d2, extra)
    if sub == 1:
        vals = field.values[np.ix_(*axes_idx)]
    else:
        vals = field.spec.evaluate_grid(axes_x) * field.normalization_factor
    return vals[d2 <= radius * radius]


def mean_value_parts(field: SampledField, center, radius: float, sub: int | None = None) -> tuple[float, float, float]:
    """(integral of phi, of phi+, of phi-) over a ball; ``sub`` as in :func:`mean_value_defect`."""
    point = _as_point(field, center)
    sub = quadrature_subdivision(field, radius) if sub is None else sub
    vals = _ball_values(field, point, radius, sub) * (field.cell_volume / sub**field.dimension)
    return float(np.sum(vals)), float(np.sum(vals[vals > 0])), float(-np.sum(vals[vals < 0]))


def _as_point(field: SampledField, center) -> np.ndarray:
    c = np.asarray(center)
    if np.issubdtype(c.dtype, np.integer):
        return field.cell_center(c)
    return c.astype(float)


def mean_value_defect(field: SampledField, center, radius: float, sub: int | None = None) -> float:
    """|integral of phi| / integral of |phi| over the ball of ``radius`` about a nodal point.

    ``center`` is a cell index (integer tuple) or a physical point. Balls spanning
    only a few cells are integrated on a refined midpoint grid of the analytic
    field (``sub`` sub-cells per cell edge, chosen automatically when None);
    ``sub=1`` forces the plain cell sum.
    """
    point = _as_point(field, center)
    if radius > min(field.side_lengths) / 4:
        raise ValueError("radius exceeds mean-value guard")
    peak = float(np.max(np.abs(field.values)))
    if abs(field.evaluate(point)) >= 1e-6 * peak:
        raise ValueError("center not on nodal set")
    sub = quadrature_subdivision(field, radius) if sub is None else sub
    vals = _ball_values(field, point, radius, sub)
    total = float(np.sum(np.abs(vals)))
    if total == 0:
        return 0.0
    return abs(float(np.sum(vals))) / total


def find_special_cube(field: SampledField, decomposition: NodalDecomposition, label: int,
                      covering: CubeCovering, defect_radius: float | None = None) -> SpecialCube:
    """The good cube of least scaled-cube quotient and its comparison with (kappa / tau) lambda_1.

    lambda_1 is the discrete quotient of the whole zero extension, so the bound is
    checked against the same discretisation as the local quotients.
    """
    dom = decomposition[label]
    good_mass = float(domain_good_mass(covering, decomposition)[label])
    tau = good_mass / dom.l2_mass
    if not tau > 0:
        raise ValueError("tau must be positive for the special cube")
    lam1 = domain_quotient(decomposition, label)
    num, den = cube_quotients(decomposition, label, covering, scaled=True)
    meets = contract((decomposition.labels == label).astype(float), covering.inner_weights) > 0
    cand = covering.good & meets & (den > 0)
    rhs = covering.kappa / tau * lam1
    if not np.any(cand):
        raise ClaimViolation("special cube missing: no good cube meets the domain")
    q = np.full(num.shape, np.inf)
    q[cand] = num[cand] / den[cand]
    flat = int(np.argmin(q))  # first minimum in C order
    cube = tuple(int(v) for v in np.unravel_index(flat, q.shape))
    quotient = float(q[cube])
    if quotient > rhs * (1 + 1e-12):
        raise ClaimViolation(f"special cube missing: quotient {quotient!r} > {rhs!r}")
    pos, neg = cube_asymmetry(covering, cube)
    point = find_nodal_point(field, covering.cube_region(cube, scaled=False))
    defect = None
    if point is not None:
        r = 0.5 / math.sqrt(field.eigenvalue) if defect_radius is None else defect_radius
        defect = mean_value_defect(field, point, r)
    return SpecialCube(label, cube, quotient, rhs, lam1, tau, covering.kappa, pos, neg,
                       None if point is None else tuple(float(v) for v in point), defect)


def cube_quotient_constant(quotient: float, lam: float, h: float, n: int) -> float:
    """Constant C making the lower Rayleigh bound C (lambda^((1-n)/2))^(1-2/n) / h^2 tight."""
    return quotient * h * h / (lam ** ((1 - n) / 2)) ** (1 - 2 / n)


def asymmetry_constant(fraction: float, gamma: float) -> float:
    """Empirical C in fraction >= C / gamma^2."""
    return fraction * gamma * gamma
