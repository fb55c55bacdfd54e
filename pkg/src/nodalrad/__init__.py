"""Inner radii of nodal domains of Laplace eigenfunctions on flat tori and boxes.

Pipeline: build an eigenfunction from its eigenspace, sample it on a grid,
split the grid into nodal domains with exact distance transforms, cover it by
good and bad cubes, then check the local Rayleigh-quotient and inner-radius
bounds per domain and across a seeded ensemble.
"""

from .config import RunConfig
from .covering import ClaimViolation, CubeCovering, build_covering, find_star_domain, tau
from .nodal import NodalDecomposition, NodalDomain, decompose
from .pipeline import analyze, cmd_analyze, cmd_gen, cmd_scan
from .sampling import SampledField, sample
from .spectral import EigenfunctionSpec, ManifoldSpec, random_eigenfunction, torus_eigenvalue, unit_box, unit_torus

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "ClaimViolation", "CubeCovering", "build_covering", "find_star_domain", "tau",
    "NodalDecomposition", "NodalDomain", "decompose", "analyze", "cmd_analyze", "cmd_gen", "cmd_scan",
    "SampledField", "sample", "EigenfunctionSpec", "ManifoldSpec", "random_eigenfunction",
    "torus_eigenvalue", "unit_box", "unit_torus",
]
