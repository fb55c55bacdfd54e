"""Closed-form fixtures with known answers; the ``verify`` subcommand runs these."""

from __future__ import annotations

import math

import numpy as np

from .edt import distance_transform
from .nodal import decompose
from .rayleigh import mean_value_defect
from .sampling import discrete_gradient_energy, sample
from .spectral import Mode, EigenfunctionSpec, single_mode, unit_box, unit_torus


def slab(n: int = 3) -> EigenfunctionSpec:
    """sin(2 pi x) on the unit n-torus."""
    k = (1,) + (0,) * (n - 1)
    return single_mode(unit_torus(n), k, sin=1.0)


def checkerboard() -> EigenfunctionSpec:
    """sin(2 pi x) sin(2 pi y) on the unit 2-torus, written as two plane waves."""
    m = unit_torus(2)
    return EigenfunctionSpec(m, (Mode((1, -1), 0.5), Mode((1, 1), -0.5)), 8 * math.pi**2, None)


def box_ground_state(n: int = 3) -> EigenfunctionSpec:
    return single_mode(unit_box(n), (1,) * n, cos=1.0)


def _brute_edt(mask: np.ndarray, periodic) -> np.ndarray:
    """Nearest-complement search; cells just beyond a non-periodic wall count as complement."""
    per = np.array(periodic)
    shape = np.array(mask.shape)
    padded = np.pad(~mask, [(0, 0) if p else (1, 1) for p in periodic], constant_values=True)
    outside = np.argwhere(padded) - np.where(per, 0, 1)
    out = np.zeros(mask.shape)
    for p in np.argwhere(mask):
        d = np.abs(outside - p)
        d = np.where(per, np.minimum(d, shape - d), d)
        out[tuple(p)] = np.min(np.sum(d * d, axis=1)) if len(outside) else np.inf
    return out


def _check(name, ok, detail):
    return name, bool(ok), detail


def run_fixtures() -> list[tuple[str, bool, str]]:
    results = []

    f = sample(slab(), 32)
    dec = decompose(f)
    h = f.spacing[0]
    vols = sorted(d.volume for d in dec.domains)
    rads = [d.inradius for d in dec.domains]
    results.append(_check(
        "slab domains", len(dec.domains) == 2
        and all(abs(v - 0.5) <= 2 * h for v in vols) and all(abs(r - 0.25) <= h for r in rads),
        f"{len(dec.domains)} domains, volumes {vols}, inradii {rads}"))

    f = sample(checkerboard(), 32)
    dec = decompose(f)
    rads = [d.inradius for d in dec.domains]
    results.append(_check("checkerboard domains",
                          len(dec.domains) == 4 and all(abs(r - 0.25) <= f.spacing[0] for r in rads),
                          f"{len(dec.domains)} domains, inradii {rads}"))

    f = sample(box_ground_state(), 64)
    q = discrete_gradient_energy(f)
    results.append(_check("box ground-state quotient", abs(q / (3 * math.pi**2) - 1) < 0.03,
                          f"quotient / 3 pi^2 = {q / (3 * math.pi**2):.6f}"))

    f = sample(slab(), 32)
    d = mean_value_defect(f, np.array([0.0, 0.4, 0.7]), 0.2)
    results.append(_check("slab mean-value defect", d < 1e-6, f"defect {d:.3e}"))

    rng = np.random.default_rng(7)
    worst = 0.0
    for shape, per in [((9, 7, 6), (True, True, True)), ((8, 11), (True, False)), ((13,), (False,))]:
        mask = rng.random(shape) < 0.8
        got = distance_transform(mask, per)
        want = _brute_edt(mask, per)
        worst = max(worst, float(np.max(np.abs(np.where(mask, got - want, 0.0)))))
    results.append(_check("distance transform vs brute force", worst == 0.0, f"max abs difference {worst}"))
    return results


__all__ = ["slab", "checkerboard", "box_ground_state", "run_fixtures"]
