"""A reduced ensemble scan: fat-domain inradius against lambda, with the summary printed.

    python demos/scaling_scan.py [out_dir]

Uses three seeds on a decade of |k|^2; the full acceptance scan lives in configs/t3_scan.json.
"""

import json
import sys
from pathlib import Path

from nodalrad import RunConfig, cmd_scan

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/demo_scan")
config = RunConfig(k_squared=[3, 4, 5, 6, 8, 11, 14, 19, 24, 30], seeds_per_eigenvalue=3)
code = cmd_scan(config, out)
s = json.loads((out / "scan_summary.json").read_text())

fat = s["fat_domain_scaling"]
print(f"{s['members']} members, exit code {code}")
print(f"fat-domain slope {fat['slope']:.3f}  95% CI [{fat['ci_low']:.3f}, {fat['ci_high']:.3f}]  (expect -1/2)")
print(f"inradius * sqrt(lambda) between {fat['C1']:.3f} and {fat['C2']:.3f}")
sm = s["sum_inequality"]
print(f"sum of inradius^6: slope {sm['slope']:.3f} (window asks >= {config.windows['sum_slope_min']})")
thm = s["bound_constant"]
print(f"bound constant C = {thm['C']:.2f}, spread max/min {thm['max_over_min']:.3f}")
print("pointwise:", s["pointwise"])
