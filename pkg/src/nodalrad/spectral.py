"""Exact Laplacian eigenfunctions on flat tori and Dirichlet boxes."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TORUS = "torus"
BOX = "dirichlet-box"
_REL_TOL = 1e-12


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    side_lengths: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in (TORUS, BOX):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        object.__setattr__(self, "side_lengths", tuple(float(s) for s in self.side_lengths))
        if len(self.side_lengths) not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if any(not s > 0 for s in self.side_lengths):
            raise ValueError("side lengths must be positive")

    @property
    def dimension(self) -> int:
        return len(self.side_lengths)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return (self.kind == TORUS,) * self.dimension

    @property
    def volume(self) -> float:
        return math.prod(self.side_lengths)

    def mode_eigenvalue(self, k: Sequence[int]) -> float:
        """Analytic eigenvalue of lattice vector ``k``."""
        q = sum((ki / L) ** 2 for ki, L in zip(k, self.side_lengths))
        if self.kind == TORUS:
            return 4 * math.pi**2 * q
        return math.pi**2 * q

    def admissible(self, k: Sequence[int]) -> bool:
        if len(k) != self.dimension:
            return False
        if self.kind == BOX:
            return all(ki >= 1 for ki in k)
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind, "side_lengths": list(self.side_lengths)}

    @classmethod
    def from_dict(cls, d: dict) -> "ManifoldSpec":
        return cls(d["kind"], tuple(d["side_lengths"]))


def unit_torus(n: int = 3) -> ManifoldSpec:
    return ManifoldSpec(TORUS, (1.0,) * n)


def unit_box(n: int = 3) -> ManifoldSpec:
    return ManifoldSpec(BOX, (1.0,) * n)


@dataclass(frozen=True)
class Mode:
    """One lattice mode. On the box only ``cos`` is used, as the sine-product coefficient."""

    k: tuple[int, ...]
    cos: float
    sin: float = 0.0


@dataclass(frozen=True)
class EigenfunctionSpec:
    manifold: ManifoldSpec
    modes: tuple[Mode, ...]
    eigenvalue: float
    rng_seed: int | None = None
    _k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("eigenfunction needs at least one mode")
        for m in self.modes:
            if not self.manifold.admissible(m.k):
                raise ValueError(f"mode {m.k} not admissible on {self.manifold.kind}")
            lam = self.manifold.mode_eigenvalue(m.k)
            if abs(lam - self.eigenvalue) > _REL_TOL * max(abs(lam), 1.0):
                raise ValueError(f"mode {m.k} has eigenvalue {lam!r}, expected {self.eigenvalue!r}")
            if self.manifold.kind == BOX and m.sin != 0.0:
                raise ValueError("box modes carry a single coefficient")
        if all(m.cos == 0.0 and m.sin == 0.0 for m in self.modes):
            raise ValueError("all coefficients are zero")
        object.__setattr__(self, "_k", np.array([m.k for m in self.modes], dtype=float))

    @property
    def dimension(self) -> int:
        return self.manifold.dimension

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([[m.cos, m.sin] for m in self.modes])

    def evaluate(self, point) -> float:
        return evaluate(self, point)

    def evaluate_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate on the tensor grid spanned by 1-D coordinate arrays ``axes``."""
        L = self.manifold.side_lengths
        n = self.dimension
        out = np.zeros(tuple(len(a) for a in axes))
        if self.manifold.kind == BOX:
            for m in self.modes:
                term = np.array(m.cos)
                for i in range(n):
                    s = np.sin(np.pi * m.k[i] * axes[i] / L[i])
                    term = np.multiply.outer(term, s) if term.ndim else term * s
                out += term
            return out
        # separable phases: exp(i 2pi k.x/L) = prod_i exp(i 2pi k_i x_i / L_i)
        for m in self.modes:
            phase = np.array(1.0 + 0j)
            for i in range(n):
                p = np.exp(2j * np.pi * m.k[i] * axes[i] / L[i])
                phase = np.multiply.outer(phase, p) if phase.ndim else phase * p
            out += m.cos * phase.real + m.sin * phase.imag
        return out

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold.to_dict(),
            "modes": [list(m.k) for m in self.modes],
            "coefficients": [[m.cos, m.sin] for m in self.modes],
            "lambda": self.eigenvalue,
            "seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EigenfunctionSpec":
        for key in ("manifold", "modes", "coefficients", "lambda"):
            if key not in d:
                raise KeyError(f"missing key {key!r}")
        try:
            manifold = ManifoldSpec.from_dict(d["manifold"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad value for key 'manifold': {exc}") from exc
        if len(d["modes"]) != len(d["coefficients"]):
            raise ValueError("keys 'modes' and 'coefficients' differ in length")
        try:
            modes = tuple(
                Mode(tuple(int(v) for v in k), float(c[0]), float(c[1]))
                for k, c in zip(d["modes"], d["coefficients"])
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"bad value for key 'modes'/'coefficients': {exc}") from exc
        seed = d.get("seed")
        return cls(manifold, modes, float(d["lambda"]), None if seed is None else int(seed))

    def dumps(self) -> str:
        # repr-based float formatting makes the decimal round trip exact
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "EigenfunctionSpec":
        return cls.from_dict(json.loads(text))


def _canonical_torus(k: tuple[int, ...]) -> tuple[int, ...]:
    neg = tuple(-v for v in k)
    return max(k, neg)


def enumerate_eigenspace(manifold: ManifoldSpec, lam_target: float, lam_window: float = 0.0) -> list[tuple[int, ...]]:
    """All admissible lattice vectors with eigenvalue within the window, sorted.

    Torus vectors are reduced modulo k -> -k, keeping the lexicographically
    larger representative.
    """
    if lam_window < 0:
        raise ValueError("lam_window must be non-negative")
    lo = lam_target - lam_window
    hi = lam_target + lam_window
    if hi < 0:
        return []
    scale = 2 * math.pi if manifold.kind == TORUS else math.pi
    # small relative slack so exact targets are not lost to rounding
    tol = _REL_TOL * max(abs(lam_target), 1.0)
    bounds = [int(math.floor(L * math.sqrt(hi + tol) / scale)) for L in manifold.side_lengths]
    if manifold.kind == TORUS:
        ranges = [range(-b, b + 1) for b in bounds]
    else:
        ranges = [range(1, b + 1) for b in bounds]
    found = set()
    for k in itertools.product(*ranges):
        lam = manifold.mode_eigenvalue(k)
        if lo - tol <= lam <= hi + tol:
            found.add(_canonical_torus(k) if manifold.kind == TORUS else k)
    return sorted(found)


def random_eigenfunction(manifold: ManifoldSpec, lam_target: float, lam_window: float = 0.0,
                         seed: int = 0) -> EigenfunctionSpec:
    """Seeded standard-normal combination of one eigenspace.

    When the window contains several distinct eigenvalues, the one closest to
    ``lam_target`` is used (ties go to the smaller eigenvalue).
    """
    ks = enumerate_eigenspace(manifold, lam_target, lam_window)
    if not ks:
        raise ValueError(f"no modes at target eigenvalue {lam_target!r}")
    lams = {k: manifold.mode_eigenvalue(k) for k in ks}
    best = min(lams.values(), key=lambda v: (abs(v - lam_target), v))
    ks = [k for k in ks if abs(lams[k] - best) <= _REL_TOL * max(best, 1.0)]
    lam = lams[ks[0]]
    rng = np.random.default_rng(seed)
    modes = []
    for k in ks:
        if manifold.kind == TORUS:
            a, b = rng.standard_normal(2)
            if not any(k):
                b = 0.0  # sine of the constant mode vanishes identically
            modes.append(Mode(k, float(a), float(b)))
        else:
            modes.append(Mode(k, float(rng.standard_normal())))
    return EigenfunctionSpec(manifold, tuple(modes), lam, seed)


def torus_eigenvalue(k_squared: int) -> float:
    """Eigenvalue 4 pi^2 |k|^2 of the unit torus."""
    return 4 * math.pi**2 * k_squared


def evaluate(spec: EigenfunctionSpec, point) -> float:
    x = np.asarray(point, dtype=float)
    L = np.array(spec.manifold.side_lengths)
    if x.shape != L.shape:
        raise ValueError(f"point must have {len(L)} coordinates")
    if spec.manifold.kind == TORUS:
        x = np.mod(x, L)
        theta = 2 * np.pi * (spec._k @ (x / L))
        c = spec.coefficients
        return float(np.sum(c[:, 0] * np.cos(theta) + c[:, 1] * np.sin(theta)))
    if np.any(x < 0) or np.any(x > L):
        raise ValueError("point outside manifold")
    s = np.prod(np.sin(np.pi * spec._k * (x / L)), axis=1)
    return float(np.sum(spec.coefficients[:, 0] * s))


def single_mode(manifold: ManifoldSpec, k: Sequence[int], cos: float = 0.0, sin: float = 0.0) -> EigenfunctionSpec:
    """Convenience constructor for one-mode fixtures."""
    k = tuple(int(v) for v in k)
    return EigenfunctionSpec(manifold, (Mode(k, float(cos), float(sin)),), manifold.mode_eigenvalue(k))
