"""
Equal experience across a cell
------------------------------
Each frame the scheduler hands user i a frame ratio proportional to 1/R_i,
so every user gets the same data rate K / sum_j(1/R_j). The arrival law of
that common rate comes from convolving the per-user reciprocal PMFs on a
grid; the playout solver then gives the rate everyone can share.

    python3 demos/03_equal_experience.py
"""

from liveplayout.allocation import cell_from_mapping, dynamic_share, equal_experience_rate, harmonic_rate_mean
from liveplayout.data import K_BLOCKS, amsterdam_pmf
from liveplayout.playout import ConstraintsUnsatisfiable, QoeConstraints

print("one frame, per-block rates 100 and 300 kb/s ->", dynamic_share([100e3, 300e3]))

c = QoeConstraints(0.05, 0.01)
for n in (4, 6, 8):
    users = {u: amsterdam_pmf(u) for u in range(1, n + 1)}
    cell = cell_from_mapping(users, K_BLOCKS)
    mean = K_BLOCKS * harmonic_rate_mean(list(users.values()))
    try:
        U = equal_experience_rate(cell, c).U
        print(f"{n} users: mean common rate {mean / 1e6:5.2f} Mb/s, guaranteed playout {U / 1e6:5.2f} Mb/s")
    except ConstraintsUnsatisfiable as exc:
        print(f"{n} users: targets cannot be met ({exc})")
