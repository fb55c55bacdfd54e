"""Uniform cell-centred samplings, midpoint quadrature and discrete Dirichlet energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import EigenfunctionSpec

MIN_RESOLUTION = 8
NYQUIST_CELLS = 6.0
DEFAULT_CELLS_PER_WAVELENGTH = 10.0


@dataclass(frozen=True, eq=False)
class SampledField:
    spec: EigenfunctionSpec
    resolution: tuple[int, ...]
    spacing: tuple[float, ...]
    values: np.ndarray
    periodic: tuple[bool, ...]
    normalization_factor: float

    @property
    def dimension(self) -> int:
        return len(self.resolution)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def eigenvalue(self) -> float:
        return self.spec.eigenvalue

    @property
    def side_lengths(self) -> tuple[float, ...]:
        return self.spec.manifold.side_lengths

    def cell_center(self, index) -> np.ndarray:
        return (np.asarray(index, dtype=float) + 0.5) * np.array(self.spacing)

    def evaluate(self, point) -> float:
        """Normalised analytic value at an arbitrary point."""
        return self.spec.evaluate(point) * self.normalization_factor


def _as_resolution(resolution, n: int) -> tuple[int, ...]:
    if np.isscalar(resolution):
        return (int(resolution),) * n
    res = tuple(int(r) for r in resolution)
    if len(res) != n:
        raise ValueError(f"resolution needs {n} entries")
    return res


def minimum_resolution(spec: EigenfunctionSpec, cells_per_wavelength: float = NYQUIST_CELLS) -> tuple[int, ...]:
    """Cells per axis needed for the requested sampling density of the wavelength 2 pi / sqrt(lambda)."""
    lam = spec.eigenvalue
    return tuple(
        max(MIN_RESOLUTION, math.ceil(cells_per_wavelength * math.sqrt(lam) * L / (2 * math.pi) - 1e-9))
        for L in spec.manifold.side_lengths
    )


def default_resolution(spec: EigenfunctionSpec, cells_per_wavelength: float = DEFAULT_CELLS_PER_WAVELENGTH,
                       minimum: int = MIN_RESOLUTION) -> int:
    """Smallest power of two giving ``cells_per_wavelength`` on every axis."""
    need = max(max(minimum_resolution(spec, cells_per_wavelength)), minimum)
    return 1 << (need - 1).bit_length()


def sample(spec: EigenfunctionSpec, resolution) -> SampledField:
    n = spec.dimension
    res = _as_resolution(resolution, n)
    need = minimum_resolution(spec)
    if any(r < MIN_RESOLUTION for r in res) or any(r < m for r, m in zip(res, need)):
        raise ValueError(f"resolution below Nyquist guard: need at least {max(need)} cells per axis, got {res}")
    L = spec.manifold.side_lengths
    spacing = tuple(Li / r for Li, r in zip(L, res))
    axes = [(np.arange(r) + 0.5) * h for r, h in zip(res, spacing)]
    raw = spec.evaluate_grid(axes)
    norm = math.sqrt(float(np.sum(raw * raw)) * math.prod(spacing))
    if norm == 0.0:
        raise ValueError("field identically zero on grid")
    factor = 1.0 / norm
    values = raw * factor
    values.setflags(write=False)
    return SampledField(spec, res, spacing, values, spec.manifold.periodic, factor)


def from_array(values: np.ndarray, spec: EigenfunctionSpec, normalize: bool = False) -> SampledField:
    """Wrap an arbitrary array as a field on ``spec``'s manifold (test fixtures, oracles)."""
    values = np.array(values, dtype=float)
    res = values.shape
    L = spec.manifold.side_lengths
    spacing = tuple(Li / r for Li, r in zip(L, res))
    factor = 1.0
    if normalize:
        factor = 1.0 / math.sqrt(float(np.sum(values**2)) * math.prod(spacing))
        values = values * factor
    values.setflags(write=False)
    return SampledField(spec, tuple(res), spacing, values, spec.manifold.periodic, factor)


def l2_mass(field: SampledField, mask=None) -> float:
    v2 = field.values * field.values
    if mask is None:
        return float(np.sum(v2)) * field.cell_volume
    return float(np.sum(v2[np.asarray(mask, dtype=bool)])) * field.cell_volume


def energy_density(field: SampledField, mask=None, labels=None) -> np.ndarray:
    """Per-cell Dirichlet energy of the field restricted to ``mask`` and extended by zero.

    Energy lives on cell faces. A face inside the mask carries (f_p - f_q)^2 / h^2,
    split evenly between its cells. A face leaving the mask is charged entirely to
    the inside cell: f_p^2 / h^2 against a same-sign or zero neighbour, and
    f_p (f_p - f_q) / h^2 against an opposite-sign neighbour, which is the energy
    of the linear interpolant up to its zero crossing. With this rule the
    energies of complementary masks add up to the energy of the whole field.
    Dirichlet walls act as an odd ghost cell.

    Passing an integer ``labels`` array instead of ``mask`` treats every nonzero
    label as its own mask and returns all of their densities in one array.
    """
    phi = field.values
    if labels is not None:
        lab = np.asarray(labels)
        inside = lab > 0
    else:
        lab = None
        inside = np.ones(phi.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    dens = np.zeros(phi.shape)
    for axis, (h, per) in enumerate(zip(field.spacing, field.periodic)):
        inv_h2 = 1.0 / (h * h)
        if per:
            q = np.roll(phi, -1, axis=axis)
            q_in = np.roll(inside, -1, axis=axis)
            p, p_in = phi, inside
            if lab is not None:
                both = p_in & (lab == np.roll(lab, -1, axis=axis))
        else:
            sl_p = [slice(None)] * phi.ndim
            sl_q = [slice(None)] * phi.ndim
            sl_p[axis] = slice(0, -1)
            sl_q[axis] = slice(1, None)
            p, q = phi[tuple(sl_p)], phi[tuple(sl_q)]
            p_in, q_in = inside[tuple(sl_p)], inside[tuple(sl_q)]
            if lab is not None:
                both = p_in & (lab[tuple(sl_p)] == lab[tuple(sl_q)])
        if lab is None:
            both = p_in & q_in
        diff2 = (p - q) ** 2
        opp = p * q < 0
        to_p = np.where(both, 0.5 * diff2, np.where(p_in, np.where(opp, p * (p - q), p * p), 0.0))
        to_q = np.where(both, 0.5 * diff2, np.where(q_in, np.where(opp, q * (q - p), q * q), 0.0))
        if per:
            dens += to_p * inv_h2
            dens += np.roll(to_q, 1, axis=axis) * inv_h2
        else:
            sl_p = [slice(None)] * phi.ndim
            sl_q = [slice(None)] * phi.ndim
            sl_p[axis] = slice(0, -1)
            sl_q[axis] = slice(1, None)
            dens[tuple(sl_p)] += to_p * inv_h2
            dens[tuple(sl_q)] += to_q * inv_h2
            for end in (0, -1):
                sl = [slice(None)] * phi.ndim
                sl[axis] = end
                w = phi[tuple(sl)]
                # ghost value -w: opposite sign, charge w (w + w)
                dens[tuple(sl)] += np.where(inside[tuple(sl)], 2.0 * w * w, 0.0) * inv_h2
    dens *= field.cell_volume
    return dens


def discrete_gradient_energy(field: SampledField, mask=None) -> float:
    """Dirichlet energy of the zero extension of the field off ``mask``, summed over ``mask``."""
    dens = energy_density(field, mask)
    if mask is None:
        return float(np.sum(dens))
    return float(np.sum(dens[np.asarray(mask, dtype=bool)]))


def write_raw(field: SampledField, path) -> tuple[Path, Path]:
    """Little-endian float64 dump in C (axis-major) order plus a text header."""
    path = Path(path)
    data = np.ascontiguousarray(field.values, dtype="<f8")
    path.write_bytes(data.tobytes(order="C"))
    header = path.with_suffix(path.suffix + ".hdr")
    header.write_text(
        "resolution " + " ".join(str(r) for r in field.resolution) + "\n"
        + "spacing " + " ".join(repr(h) for h in field.spacing) + "\n"
        + f"lambda {field.eigenvalue!r}\n"
    )
    return path, header


def read_raw(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = {}
    for line in path.with_suffix(path.suffix + ".hdr").read_text().splitlines():
        key, *vals = line.split()
        meta[key] = vals
    res = tuple(int(v) for v in meta["resolution"])
    values = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(res)
    header = {
        "resolution": res,
        "spacing": tuple(float(v) for v in meta["spacing"]),
        "lambda": float(meta["lambda"][0]),
    }
    return values, header
