"""Walk one random 3-torus eigenfunction through the pipeline and print what each stage finds.

    python demos/one_eigenfunction.py [k_squared] [seed]
"""

import math
import sys

from nodalrad import RunConfig, analyze, random_eigenfunction, torus_eigenvalue, unit_torus

k2 = int(sys.argv[1]) if len(sys.argv) > 1 else 9
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
lam = torus_eigenvalue(k2)
spec = random_eigenfunction(unit_torus(3), lam, seed=seed)
print(f"|k|^2 = {k2}: lambda = {lam:.3f}, {len(spec.modes)} modes in the eigenspace")

a = analyze(spec, RunConfig(k_squared=[k2]), f"demo_k{k2}_s{seed}")
f, dec, cov, rep = a.field, a.decomposition, a.covering, a.report
print(f"grid {f.resolution[0]}^3, {len(dec.domains)} nodal domains, {dec.zero_cell_count} zero cells")

print("\nlargest domains (inradius in units of the wavelength 1/sqrt(lambda)):")
print(f"{'label':>5} {'sign':>4} {'volume':>8} {'L2 mass':>8} {'inrad*sqrt(lam)':>16} {'R/lambda':>9}")
for row in rep.rows[:6]:
    print(f"{row.label:5d} {row.sign:+4d} {row.volume:8.4f} {row.l2_mass:8.4f} "
          f"{row.upper_ratio:16.3f} {row.rayleigh_quotient / lam:9.4f}")

print(f"\ncube side h = {cov.h}, delta = {cov.delta:.2f}, kappa = {cov.kappa}, gamma = {cov.gamma:g}")
print(f"good-set mass {cov.good_mass:.4f} against the floor {cov.good_mass_floor:.4f}")
print(f"star domain: {rep.star_domain}")
sc = a.special.get(rep.star_domain)
if sc is not None:
    print(f"special cube {sc.cube}: local quotient {sc.quotient:.1f} <= {sc.rhs:.1f}")

lm = rep.extras["mean_value_defect"]
print(f"\nmean-value defect at r = {lm['radius']:.4f}: max {lm['max_defect']:.3g} over {lm['count']} nodal points")
eq = rep.extras["ball_fraction"]
print(f"ball-fraction deficit exponent near the max point: {eq['slope']:.2f} (domain {eq['label']})")
print("\nchecks:", ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in rep.checks.items()))
print(f"fat domain inradius * sqrt(lambda) = {rep.fat_domain_inradius * math.sqrt(lam):.3f}")
