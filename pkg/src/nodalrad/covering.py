"""Good/bad cube coverings, the good set and per-domain good-mass fractions."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from .nodal import NodalDecomposition
from .sampling import SampledField

SCHEMA_VERSION = 1


class ClaimViolation(RuntimeError):
    """A pointwise inequality that must hold under the stated hypotheses failed."""


def default_delta(n: int) -> float:
    return 16 * math.sqrt(n)


def _cells_per_cube(field: SampledField, h: float) -> tuple[int, ...]:
    out = []
    for s, N, per in zip(field.spacing, field.resolution, field.periodic):
        m = h / s
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > 1e-9 * max(m, 1.0):
            raise ValueError("cube size must align to grid")
        if mi > N or (per and N % mi):
            raise ValueError(f"cube size must align to grid: {mi} cells do not tile {N}")
        out.append(mi)
    return tuple(out)


def _axis_weights(N: int, m: int, delta: float, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Inner and scaled membership matrices (cubes x cells) for one axis.

    A cell belongs to a scaled cube when its centre lies in the half-open interval
    [c - delta m / 2, c + delta m / 2) around the cube centre c; on a periodic axis
    the interval is unrolled, so a cell met twice counts twice.
    """
    nc = N // m
    inner = np.zeros((nc, N))
    scaled = np.zeros((nc, N))
    half = delta * m / 2
    for a in range(nc):
        inner[a, a * m:(a + 1) * m] = 1.0
        centre = (a + 0.5) * m
        # cell j has centre j + 1/2
        lo = math.ceil(centre - half - 0.5 - 1e-9)
        hi = math.ceil(centre + half - 0.5 - 1e-9)
        idx = np.arange(lo, hi)
        if periodic:
            np.add.at(scaled[a], idx % N, 1.0)
        else:
            idx = idx[(idx >= 0) & (idx < N)]
            scaled[a, idx] = 1.0
    return inner, scaled


def contract(values: np.ndarray, mats) -> np.ndarray:
    """Apply one (cubes x cells) matrix per axis: out[a, b, ...] = sum W0[a, i] W1[b, j] ... v[i, j, ...]."""
    out = values
    for axis, W in enumerate(mats):
        out = np.moveaxis(np.tensordot(W, out, axes=([1], [axis])), 0, axis)
    return out


@dataclass(eq=False)
class CubeCovering:
    h: float
    delta: float
    gamma: float
    cube_cells: tuple[int, ...]
    mass_inner: np.ndarray
    mass_scaled: np.ndarray
    good: np.ndarray
    kappa: int
    good_mass: float
    boundary_layer_mass: float
    field: SampledField = dc_field(repr=False)
    inner_weights: tuple = dc_field(repr=False, default=())
    scaled_weights: tuple = dc_field(repr=False, default=())

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mass_inner.shape

    @property
    def cubes(self) -> list[tuple[tuple[int, ...], float, float, bool]]:
        return [(idx, float(self.mass_inner[idx]), float(self.mass_scaled[idx]), bool(self.good[idx]))
                for idx in np.ndindex(self.shape)]

    @property
    def good_mass_floor(self) -> float:
        return 1.0 - self.kappa / self.gamma

    @property
    def good_mass_margin(self) -> float:
        return self.good_mass - self.good_mass_floor

    def good_set(self) -> np.ndarray:
        """Cell mask of the union of good inner cubes."""
        g = self.good
        for axis, m in enumerate(self.cube_cells):
            g = np.repeat(g, m, axis=axis)
        out = np.zeros(self.field.resolution, dtype=bool)
        out[tuple(slice(0, s) for s in g.shape)] = g
        return out

    def cube_region(self, index, scaled: bool = True) -> tuple[np.ndarray, ...]:
        """Per-axis cell index arrays of a cube, repeated by wrap multiplicity; use with ``np.ix_``."""
        mats = self.scaled_weights if scaled else self.inner_weights
        out = []
        for W, a in zip(mats, index):
            w = W[a].astype(int)
            out.append(np.repeat(np.arange(w.size), w))
        return tuple(out)

    def with_gamma(self, gamma: float) -> "CubeCovering":
        good = classify(self.mass_inner, self.mass_scaled, gamma)
        gm = float(np.sum(self.mass_inner[good]))
        return replace(self, gamma=float(gamma), good=good, good_mass=gm)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "h": self.h,
            "delta": self.delta,
            "gamma": self.gamma,
            "kappa_delta": self.kappa,
            "good_mass": self.good_mass,
            "good_mass_floor": self.good_mass_floor,
            "good_mass_margin": self.good_mass_margin,
            "boundary_layer_mass": self.boundary_layer_mass,
            "cube_cells": list(self.cube_cells),
            "cubes_per_axis": list(self.shape),
        }

    def to_csv(self, path, header_path=None) -> None:
        n = len(self.shape)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{k}" for k in range(n)] + ["mass_inner", "mass_scaled", "good"])
            for idx, mi, ms, g in self.cubes:
                w.writerow(list(idx) + [repr(mi), repr(ms), int(g)])
        if header_path is not None:
            Path(header_path).write_text(json.dumps(self.summary(), indent=1) + "\n", encoding="utf-8")


def classify(mass_inner: np.ndarray, mass_scaled: np.ndarray, gamma: float) -> np.ndarray:
    # empty inner cubes count as good
    return (mass_scaled <= gamma * mass_inner) | (mass_inner == 0)


def build_covering(field: SampledField, h: float, gamma: float | None = None, delta: float | None = None,
                   gamma_rule: str | None = None) -> CubeCovering:
    """Cover the grid by cubes of side ``h`` and classify them.

    Pass ``gamma`` directly, or ``gamma_rule="4kappa"`` to set gamma = 4 kappa_delta
    once the overlap count is known.
    """
    n = field.dimension
    delta = default_delta(n) if delta is None else float(delta)
    if not delta > 1:
        raise ValueError("delta must exceed 1")
    m = _cells_per_cube(field, h)
    inner_w, scaled_w = [], []
    for N, mi, per in zip(field.resolution, m, field.periodic):
        a, b = _axis_weights(N, mi, delta, per)
        inner_w.append(a)
        scaled_w.append(b)
    kappa = int(math.prod(int(W.sum(axis=0).max()) for W in scaled_w))
    if gamma_rule is not None:
        if gamma_rule != "4kappa":
            raise ValueError(f"unknown gamma rule {gamma_rule!r}")
        gamma = 4.0 * kappa
    if gamma is None or not gamma > 1:
        raise ValueError("gamma must exceed 1")
    v2 = field.values * field.values * field.cell_volume
    mass_inner = contract(v2, inner_w)
    mass_scaled = contract(v2, scaled_w)
    good = classify(mass_inner, mass_scaled, gamma)
    covered = float(np.sum(mass_inner))
    return CubeCovering(
        h=float(h), delta=delta, gamma=float(gamma), cube_cells=m,
        mass_inner=mass_inner, mass_scaled=mass_scaled, good=good, kappa=kappa,
        good_mass=float(np.sum(mass_inner[good])),
        boundary_layer_mass=max(float(np.sum(v2)) - covered, 0.0),
        field=field, inner_weights=tuple(inner_w), scaled_weights=tuple(scaled_w),
    )


def inradius_cube_size(field: SampledField, decomposition: NodalDecomposition, factor: float = 8.0) -> float:
    """h = factor * (largest inner radius), snapped up to a grid-aligned size that tiles the grid.

    Capped at the whole side when the target exceeds it.
    """
    target = factor * max(d.inradius for d in decomposition.domains)
    s0 = field.spacing[0]
    start = max(1, math.ceil(target / s0 - 1e-9))
    for m0 in range(start, field.resolution[0] + 1):
        h = m0 * s0
        try:
            _cells_per_cube(field, h)
        except ValueError:
            continue
        return h
    return field.resolution[0] * s0


def good_set_mass(covering: CubeCovering) -> float:
    return covering.good_mass


def check_good_mass_floor(covering: CubeCovering, slack: float = 1e-9) -> float:
    """Margin of good_mass >= 1 - kappa/gamma; raises ClaimViolation below -slack."""
    margin = covering.good_mass_margin
    if margin < -slack:
        raise ClaimViolation(f"good-mass floor violated: good mass {covering.good_mass!r} < {covering.good_mass_floor!r}")
    return margin


def domain_good_mass(covering: CubeCovering, decomposition: NodalDecomposition) -> np.ndarray:
    """L2 mass of every domain inside the good set, indexed by label (entry 0 unused)."""
    f = covering.field
    w = (f.values * f.values * f.cell_volume)[covering.good_set()]
    labs = decomposition.labels[covering.good_set()]
    return np.bincount(labs, weights=w, minlength=len(decomposition.domains) + 1)


def tau(covering: CubeCovering, decomposition: NodalDecomposition, label: int) -> float:
    mass = decomposition[label].l2_mass
    if mass <= 0:
        raise ValueError("degenerate domain")
    return float(domain_good_mass(covering, decomposition)[label]) / mass


def all_tau(covering: CubeCovering, decomposition: NodalDecomposition) -> dict[int, float]:
    gm = domain_good_mass(covering, decomposition)
    return {d.label: float(gm[d.label]) / d.l2_mass for d in decomposition.domains if d.l2_mass > 0}


def find_star_domain(covering: CubeCovering, decomposition: NodalDecomposition) -> int | None:
    """A domain with good-set mass at least three times its bad-set mass.

    Largest mass wins, lower label on ties. Raises ClaimViolation when none
    exists although gamma >= 4 kappa; returns None in that case otherwise.
    """
    gm = domain_good_mass(covering, decomposition)
    best = None
    for d in decomposition.domains:
        good = float(gm[d.label])
        bad = d.l2_mass - good
        # relative slack absorbs summation rounding when good == 3 bad exactly
        if good >= 3 * bad - 1e-12 * d.l2_mass and (best is None or d.l2_mass > best.l2_mass * (1 + 1e-12)):
            best = d
    if best is None:
        if covering.gamma >= 4 * covering.kappa:
            raise ClaimViolation("star domain missing: no domain keeps tau >= 1/4 at gamma >= 4 kappa")
        return None
    return best.label
