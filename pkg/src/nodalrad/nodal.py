"""Nodal domains: face-connected sign components, inner radii and max-point ball profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.cluster.hierarchy import DisjointSet

from .edt import distance_transform
from .sampling import SampledField


@dataclass(frozen=True)
class NodalDomain:
    label: int
    sign: int
    cell_count: int
    volume: float
    l2_mass: float
    inradius: float
    inradius_error: float
    inradius_center: tuple[int, ...]
    max_point: tuple[int, ...]
    max_value: float


@dataclass(eq=False)
class NodalDecomposition:
    labels: np.ndarray
    domains: list[NodalDomain]
    zero_cell_count: int
    field: SampledField = dc_field(repr=False)
    # squared distance (physical units) from each signed cell to the nearest cell of other sign
    sign_distance2: np.ndarray = dc_field(repr=False)

    def __getitem__(self, label: int) -> NodalDomain:
        if not 1 <= label <= len(self.domains):
            raise KeyError(f"no domain with label {label}")
        return self.domains[label - 1]

    def mask(self, label: int) -> np.ndarray:
        self[label]
        return self.labels == label

    @property
    def fat_domain(self) -> NodalDomain:
        """Domain of largest inner radius (lowest label on ties)."""
        return max(self.domains, key=lambda d: (d.inradius, -d.label))

    def to_csv(self, path) -> None:
        n = self.field.dimension
        axes = "xyz"[:n]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "sign", "volume", "l2_mass", "inradius", "inradius_error"]
                       + [f"center_{a}" for a in axes] + [f"max_{a}" for a in axes] + ["max_value"])
            for d in self.domains:
                c = self.field.cell_center(d.inradius_center)
                m = self.field.cell_center(d.max_point)
                w.writerow([d.label, "+" if d.sign > 0 else "-", repr(d.volume), repr(d.l2_mass),
                            repr(d.inradius), repr(d.inradius_error)]
                           + [repr(float(v)) for v in c] + [repr(float(v)) for v in m] + [repr(d.max_value)])


def _label_sign_components(sign_mask: np.ndarray, periodic) -> tuple[np.ndarray, int]:
    structure = ndimage.generate_binary_structure(sign_mask.ndim, 1)
    lab, count = ndimage.label(sign_mask, structure=structure)
    if count == 0:
        return lab, 0
    ds = DisjointSet(range(1, count + 1))
    for axis, per in enumerate(periodic):
        if not per:
            continue
        a = np.take(lab, 0, axis=axis)
        b = np.take(lab, -1, axis=axis)
        touch = (a > 0) & (b > 0)
        for x, y in set(zip(a[touch].tolist(), b[touch].tolist())):
            ds.merge(x, y)
    root = np.zeros(count + 1, dtype=np.int64)
    for i in range(1, count + 1):
        root[i] = ds[i]
    return root[lab], count


def _first_argmax_per_label(labels_flat: np.ndarray, key: np.ndarray, nlab: int) -> np.ndarray:
    """Linear index of the maximal ``key`` per label, lowest index on ties."""
    idx = np.arange(labels_flat.size)
    sel = labels_flat > 0
    order = np.lexsort((idx[sel], -key[sel], labels_flat[sel]))
    lab_sorted = labels_flat[sel][order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = lab_sorted[1:] != lab_sorted[:-1]
    out = np.full(nlab + 1, -1, dtype=np.int64)
    out[lab_sorted[first]] = idx[sel][order][first]
    return out


def sign_distance2(field: SampledField) -> np.ndarray:
    """Squared distance from each strictly signed cell to the nearest cell not of its sign.

    The nearest cell outside a nodal domain always lies outside the domain's sign set
    (lattice points inside a Euclidean ball are face-connected), so two transforms
    serve every domain at once.
    """
    phi = field.values
    pos = distance_transform(phi > 0, field.periodic, field.spacing)
    neg = distance_transform(phi < 0, field.periodic, field.spacing)
    return np.where(phi > 0, pos, np.where(phi < 0, neg, 0.0))


def decompose(field: SampledField) -> NodalDecomposition:
    phi = field.values
    if not np.any(phi):
        raise ValueError("field identically zero on grid")
    pos_lab, npos = _label_sign_components(phi > 0, field.periodic)
    neg_lab, nneg = _label_sign_components(phi < 0, field.periodic)
    raw = np.where(pos_lab > 0, pos_lab, np.where(neg_lab > 0, neg_lab + npos, 0)).ravel()
    flat_idx = np.arange(raw.size)
    ids, inverse, counts = np.unique(raw, return_inverse=True, return_counts=True)
    first = np.full(ids.size, raw.size, dtype=np.int64)
    np.minimum.at(first, inverse, flat_idx)
    keep = ids > 0
    # descending size, then first cell in linear order
    order = np.lexsort((first[keep], -counts[keep]))
    relabel = np.zeros(ids.size, dtype=np.int64)
    relabel[np.flatnonzero(keep)[order]] = np.arange(1, order.size + 1)
    labels_flat = relabel[inverse]
    labels = labels_flat.reshape(phi.shape)
    nlab = order.size

    dv = field.cell_volume
    flat_phi = phi.ravel()
    cell_count = np.bincount(labels_flat, minlength=nlab + 1)
    mass = np.bincount(labels_flat, weights=flat_phi * flat_phi, minlength=nlab + 1) * dv
    max_idx = _first_argmax_per_label(labels_flat, np.abs(flat_phi), nlab)
    d2 = sign_distance2(field)
    flat_d2 = d2.ravel()
    ctr_idx = _first_argmax_per_label(labels_flat, flat_d2, nlab)
    err = math.sqrt(sum(h * h for h in field.spacing)) / 2

    domains = []
    for lab in range(1, nlab + 1):
        mi = int(max_idx[lab])
        ci = int(ctr_idx[lab])
        domains.append(NodalDomain(
            label=lab,
            sign=1 if flat_phi[mi] > 0 else -1,
            cell_count=int(cell_count[lab]),
            volume=float(cell_count[lab]) * dv,
            l2_mass=float(mass[lab]),
            inradius=math.sqrt(flat_d2[ci]),
            inradius_error=err,
            inradius_center=tuple(int(v) for v in np.unravel_index(ci, phi.shape)),
            max_point=tuple(int(v) for v in np.unravel_index(mi, phi.shape)),
            max_value=float(flat_phi[mi]),
        ))
    labels.setflags(write=False)
    return NodalDecomposition(labels, domains, int(np.count_nonzero(phi == 0)), field, d2)


def inner_radius(decomposition: NodalDecomposition, label: int) -> tuple[float, tuple[int, ...]]:
    d = decomposition[label]
    return d.inradius, d.inradius_center


def domain_inner_radius(field: SampledField, mask) -> tuple[float, tuple[int, ...]]:
    """Inner radius of an arbitrary cell set, by a transform of that set alone."""
    mask = np.asarray(mask, dtype=bool)
    d2 = distance_transform(mask, field.periodic, field.spacing)
    flat = np.where(mask, d2, -1.0).ravel()
    i = int(np.argmax(flat))
    return math.sqrt(flat[i]), tuple(int(v) for v in np.unravel_index(i, mask.shape))


def ball_offsets(field: SampledField, radius: float) -> np.ndarray:
    """Integer cell offsets whose centres lie within ``radius`` of the origin cell centre."""
    h = np.array(field.spacing)
    reach = np.floor(radius / h + 1e-12).astype(int)
    grids = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    dist2 = np.sum((offs * h) ** 2, axis=1)
    return offs[dist2 <= radius * radius * (1 + 1e-12)]


def ball_cells(field: SampledField, center, radius: float) -> tuple[np.ndarray, ...]:
    """Index arrays of the cells in a ball about a cell centre; wrapped on periodic axes, clipped otherwise."""
    offs = ball_offsets(field, radius) + np.asarray(center, dtype=int)
    res = np.array(field.resolution)
    keep = np.ones(len(offs), dtype=bool)
    for i, per in enumerate(field.periodic):
        if per:
            offs[:, i] %= res[i]
        else:
            keep &= (offs[:, i] >= 0) & (offs[:, i] < res[i])
    offs = offs[keep]
    return tuple(offs[:, i] for i in range(offs.shape[1]))


def max_point_ball_profile(field: SampledField, decomposition: NodalDecomposition, label: int,
                           radii) -> list[tuple[float, float]]:
    """Fraction of the cells of B(x0, r / sqrt(lambda)) lying in the domain, x0 its max point."""
    dom = decomposition[label]
    sqrt_lam = math.sqrt(field.eigenvalue)
    guard = min(field.side_lengths) / 2
    out = []
    for r in radii:
        if not r > 0:
            raise ValueError("radii must be positive")
        rho = r / sqrt_lam
        if rho >= guard:
            raise ValueError("radius exceeds injectivity guard")
        idx = ball_cells(field, dom.max_point, rho)
        inside = decomposition.labels[idx] == label
        out.append((float(r), float(np.count_nonzero(inside)) / inside.size))
    return out


def deficit_exponent(profiles, lo: float = 1e-4, hi: float = 0.2) -> tuple[float, int]:
    """Least-squares slope of log(1 - fraction) against log r over the decaying range.

    ``profiles`` is one profile or several on a shared radius list; several are
    averaged first. Returns (slope, number of points used); slope is nan when
    fewer than two points fall in ``lo < 1 - fraction < hi``.
    """
    profiles = [profiles] if profiles and np.isscalar(profiles[0][0]) else profiles
    r = np.array([p[0] for p in profiles[0]])
    deficit = np.mean([[1.0 - p[1] for p in prof] for prof in profiles], axis=0)
    use = (deficit > lo) & (deficit < hi)
    if np.count_nonzero(use) < 2:
        return math.nan, int(np.count_nonzero(use))
    slope = np.polyfit(np.log(r[use]), np.log(deficit[use]), 1)[0]
    return float(slope), int(np.count_nonzero(use))


def write_domains_csv(decomposition: NodalDecomposition, path) -> Path:
    decomposition.to_csv(path)
    return Path(path)
