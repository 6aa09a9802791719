# How congestion on the two packet routes turns into description counts.
# Run with: python demos/congestion_walkthrough.py

import numpy as np

from mdcfronthaul import (FronthaulConfig, deadline_slots, delivery_probability,
                          description_pmf, layer_weights, packets_per_description,
                          simulate_delivery)

cfg = FronthaulConfig.symmetric(0.3)          # 100 Mbit/s, 1 ms deadline
T_F = deadline_slots(cfg)
print("slots before the deadline:", T_F)

# one description at rate R_F needs N_F packets; every packet retries until it gets through
for R_F in (1.2, 6.0, 12.0, 18.0):
    N_F = packets_per_description(R_F, cfg)
    p = delivery_probability(0.3, N_F, T_F)
    print(f"R_F={R_F:5.1f}  N_F={N_F:2d}  P(route delivers)={p:.4f}")

# number of descriptions that make it (0, 1 or 2) and the weights the optimizer uses
pmf = description_pmf(6.0, cfg)
w1, w2 = layer_weights(pmf)
print("pmf at R_F=6:", np.round(pmf, 4), " weights:", round(w1, 4), round(w2, 4))

# the same numbers by simulation
out = simulate_delivery(cfg.eps, packets_per_description(6.0, cfg), T_F, 200000, seed=1)
print("simulated pmf:", np.round(out.empirical_pmf, 4))
