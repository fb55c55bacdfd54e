"""Run configuration, stored as a single JSON document."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .spectral import BOX, TORUS, ManifoldSpec

GAMMA_RULES = ("fixed", "4kappa", "per_domain")
H_RULES = ("fixed", "inradius")
RESOLUTION_RULES = ("pow2", "fixed")


def default_windows() -> dict:
    return {
        "fat_slope": [-0.60, -0.40],
        # frozen from the default T^3 scan (observed 1.96 .. 2.72), widened by about 10%
        "inradius_product_band": [1.75, 3.0],
        "sum_slope_min": -1.8,
        "ball_fraction_slope_min": 5.0,
        "ball_fraction_deficit_range": [1e-4, 0.2],
        "bound_constant_max_factor": 2.0,
        "bound_constant_slope_abs": 0.1,
        "kendall_p": 0.05,
        "mean_value_level": 1 / 3 + 0.05,
        "mean_value_fraction": 0.95,
        "rayleigh_rel_tol": 0.03,
        "tau_slack": 0.02,
    }


@dataclass
class RunConfig:
    manifold: dict = field(default_factory=lambda: {"kind": TORUS, "side_lengths": [1.0, 1.0, 1.0]})
    lambdas: list[float] | None = None
    k_squared: list[int] | None = None
    lam_window: float = 0.0
    seeds_per_eigenvalue: int = 5
    seed_base: int = 0
    resolution_rule: str = "pow2"
    cells_per_wavelength: float = 10.0
    min_resolution: int = 32
    resolution: int | None = None
    gamma_rule: str = "4kappa"
    gamma: float | None = None
    delta: float | None = None
    h_rule: str = "inradius"
    h: float | None = None
    h_factor: float = 8.0
    out_dir: str = "out"
    jobs: int = 1
    mean_value_points: int = 40
    ball_fraction_radii: list[float] = field(default_factory=lambda: [round(0.1 * i, 10) for i in range(1, 31)])
    windows: dict = field(default_factory=default_windows)

    def __post_init__(self):
        ManifoldSpec.from_dict(self.manifold)
        if self.gamma_rule not in GAMMA_RULES:
            raise ValueError(f"gamma_rule must be one of {GAMMA_RULES}")
        if self.h_rule not in H_RULES:
            raise ValueError(f"h_rule must be one of {H_RULES}")
        if self.resolution_rule not in RESOLUTION_RULES:
            raise ValueError(f"resolution_rule must be one of {RESOLUTION_RULES}")
        if self.gamma_rule == "fixed" and not (self.gamma and self.gamma > 1):
            raise ValueError("fixed gamma rule needs gamma > 1")
        if self.h_rule == "fixed" and not (self.h and self.h > 0):
            raise ValueError("fixed h rule needs h > 0")
        if self.resolution_rule == "fixed" and not (self.resolution and self.resolution > 0):
            raise ValueError("fixed resolution rule needs resolution > 0")
        if self.delta is not None and not self.delta > 1:
            raise ValueError("delta must exceed 1")
        for name in ("seeds_per_eigenvalue", "cells_per_wavelength", "min_resolution", "jobs", "h_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lam_window < 0:
            raise ValueError("lam_window must be non-negative")
        if self.lambdas is None and self.k_squared is None:
            raise ValueError("config needs lambdas or k_squared")
        merged = default_windows()
        merged.update(self.windows)
        self.windows = merged

    @property
    def manifold_spec(self) -> ManifoldSpec:
        return ManifoldSpec.from_dict(self.manifold)

    def eigenvalues(self) -> list[float]:
        if self.lambdas is not None:
            return [float(v) for v in self.lambdas]
        m = self.manifold_spec
        L = m.side_lengths[0]
        scale = (4 if m.kind == TORUS else 1) * math.pi**2 / L**2
        return [scale * int(k) for k in self.k_squared]

    def seeds(self) -> list[int]:
        return [self.seed_base + i for i in range(self.seeds_per_eigenvalue)]

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


__all__ = ["RunConfig", "default_windows", "GAMMA_RULES", "H_RULES", "BOX", "TORUS"]
