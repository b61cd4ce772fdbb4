"""
Covering numbers on toy models
==============================

Count Fisher balls needed to cover the parameter square of small Bernoulli
models and compare the covering slope with the effective dimension.

Run with ``python3 demos/covering_toys.py`` (about 20 s, most of it compiling
the covering kernel on first use).
"""

# %%
# Toys
# ----
# ``bern2d`` has a full-rank Fisher everywhere. ``bern2d_rank1`` only sees
# theta through theta_1 + theta_2, so its Fisher has rank one.

import numpy as np

from twosed.verify import bundled_toys, covering_count, toy_two_sed

toys = bundled_toys()

# %%
# Slopes
# ------
# log N(eps) / |log eps| tracks d_0(eps). For the rank-one model both stay
# near 1 even though the square is two dimensional.

for name in ("bern1d", "bern2d", "bern2d_rank1"):
    tm = toys[name]
    print(name)
    for eps in (1e-1, 1e-2, 1e-3):
        n = covering_count(tm, eps)
        print(f"  eps={eps:.0e}  N={n:8d}  slope={np.log(n) / abs(np.log(eps)):.3f}"
              f"  d_0={toy_two_sed(tm, eps):.3f}")
