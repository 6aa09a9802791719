# Expected sum-rate versus compression rate for a few channels, MDC against
# sending the same description on both routes.  Higher congestion pushes the
# best rate down, and layered descriptions prefer a lower rate.
# Run with: python demos/rate_tradeoff.py  (about a minute)

import numpy as np

from mdcfronthaul import FronthaulConfig, pd_fixed_rf_batch, rate_grid, sample_channel
from mdcfronthaul import cccp_fixed_rf_batch
from mdcfronthaul.optimize import rescore

n_ch = 4
chans = [sample_channel([1, 1], 2, 10 ** 2.5, seed=k) for k in range(n_ch)]
grid = rate_grid(FronthaulConfig.symmetric(0.0))
R = np.tile(grid, n_ch)
C = [c for c in chans for _ in grid]

pd = pd_fixed_rf_batch(R, C, FronthaulConfig.symmetric(0.0))
for eps in (0.1, 0.5, 0.9):
    cfg = FronthaulConfig.symmetric(eps)
    mdc = cccp_fixed_rf_batch(R, C, cfg)
    m = np.array([s.expected_sum_rate for s in mdc]).reshape(n_ch, -1).mean(0)
    p = np.array([rescore(s, cfg).expected_sum_rate for s in pd]).reshape(n_ch, -1).mean(0)
    print(f"eps={eps}: best R_F mdc {grid[m.argmax()]:.1f} ({m.max():.3f}), "
          f"pd {grid[p.argmax()]:.1f} ({p.max():.3f})")
    print("   mdc", np.round(m, 2))
    print("   pd ", np.round(p, 2))
