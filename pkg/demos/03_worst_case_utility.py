# How large a population is needed before a rare word is reliably learned?

import numpy as np

from triehh import choose_parameters, discovery_rate, min_population
from triehh.analysis import count_from_frequency

# Rate against frequency at n = 10^6
n, L = 10**6, 10
p = choose_parameters(n, L, 2.0, "invn2")
print(p.table_row())
for f in np.geomspace(1e-4, 1e-2, 9):
    W = count_from_frequency(f, n)
    print(f"f={f:.2e}  W={W:6d}  rate={discovery_rate(n, p.m, p.theta, W, L):.4f}")

# Smallest n reaching a 0.9 worst-case rate
freqs = [0.002, 0.005, 0.01, 0.02, 0.05]
print("f       " + "".join(f"eps={e:<10}" for e in (1, 2, 4)))
for f in freqs:
    row = [min_population(f, 0.9, e, L, "invn2") for e in (1.0, 2.0, 4.0)]
    print(f"{f:<8}" + "".join(f"{v:<14,d}" for v in row))
