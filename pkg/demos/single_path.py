"""Estimate both fractal indices from one simulated path.

Run with ``python demos/single_path.py [n] [seed]``.
"""

import sys

from bivfractal import MaternModel, MaternParams, SeedSpec, estimate, simulate_path
from bivfractal.covariance import trajectory_dimension

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1

params = MaternParams(0.2, 0.7, 0.45, rho=0.5)
model = MaternModel(params)
e = model.expansion
print(f"true indices: alpha11={e.alpha11:.3f} alpha22={e.alpha22:.3f}, "
      f"dimension {trajectory_dimension(e.alpha11, e.alpha22):.3f}")

path = simulate_path(model, n, SeedSpec(seed))
for kind in ("ols", "gls"):
    # GLS runs an OLS pass first to plug a smoothness value into its weights
    est = estimate(path, m=min(50, n // 4), kind=kind)
    print(f"{kind}: alpha11={est.alpha11_hat:.3f} alpha22={est.alpha22_hat:.3f} "
          f"dimension {est.dim_hat:.3f}")
