# Threshold and batch scale for epsilon = 2 and L = 10, in both delta regimes.

import numpy as np

from triehh import choose_parameters, delta_from, epsilon_from
from triehh.privacy import lambert_theta

for n in (10**4, 10**5, 10**6, 10**7):
    for mode in ("inv300n", "invn2"):
        p = choose_parameters(n, 10, 2.0, mode)
        print(f"{mode:8s}", p.table_row(), f"delta={p.delta:.3g} <= {p.delta_target:.3g}")

# delta falls factorially in theta
for theta in (4, 8, 12, 16, 20, 25):
    print(f"theta={theta:2d}  delta={delta_from(theta):.3e}")

# epsilon grows with the batch: more users sampled, less deniability
n, L, theta = 10**6, 10, 15
for gamma in np.linspace(1, 12, 6):
    print(f"gamma={gamma:5.2f}  m={int(gamma * np.sqrt(n)):6d}  epsilon={epsilon_from(n, L, theta, gamma):.3f}")

# The uncapped threshold behaves like a ln n / ln ln n for delta = n^-a
for a in (1, 2, 3):
    for n in (10**4, 10**7):
        print(f"a={a} n={n:>8d}  theta={lambert_theta(float(n) ** -a):3d}"
              f"  a ln n / ln ln n={a * np.log(n) / np.log(np.log(n)):6.2f}")
