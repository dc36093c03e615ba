"""
Minimum shares, admission and the most users at top resolution
--------------------------------------------------------------
Every user first gets the static frame ratio that guarantees U_min. Users
that do not fit are refused. The leftover frame then lifts as many users
as possible to U_max, cheapest upgrade (highest mean rate) first. The
greedy count is checked against exhaustive search and compared with three
simpler policies.

    python3 demos/04_admission_and_max_users.py
"""

from liveplayout.allocation import (
    admission_control,
    analytic_share_evaluator,
    baseline_user_counts,
    brute_force_max_users,
    cell_from_mapping,
    max_users_max_resolution,
    min_rate_share,
    min_share_search,
)
from liveplayout.data import BUFFER_PACKETS, K_BLOCKS, amsterdam_pmf, amsterdam_users
from liveplayout.playout import FrameParams, QoeConstraints

frame = FrameParams()
c = QoeConstraints(0.01, 0.04)
print("minimum frame ratio: mean-rate formula vs queue-based search")
for user in (2, 7):
    pmf = amsterdam_pmf(user)
    f = analytic_share_evaluator(pmf, K_BLOCKS, frame, BUFFER_PACKETS)
    for U in (4e6, 8e6, 20e6, 40e6):
        y = min_rate_share(U, c.delta0, K_BLOCKS, pmf)
        Y, _, d = min_share_search(f, frame.packets_per_frame(U), c)
        print(f"  user {user} U_min={U / 1e6:>4.0f} Mb/s  formula {y:.4f}  search {Y:.4f}  drop at search {d:.3f}")

cell = cell_from_mapping(amsterdam_users(), K_BLOCKS, frame, BUFFER_PACKETS)
admitted, _, left = admission_control(cell, 15e6, 0.03)
print(f"\nU_min=15 Mb/s admits {len(admitted)} of {cell.n} users, {left:.3f} of the frame left")

N, selected, plan = max_users_max_resolution(cell, 2e6, 12e6, 0.03)
print(f"U_min=2, U_max=12 Mb/s: {N} users upgraded {selected} (exhaustive search: "
      f"{brute_force_max_users(cell, 2e6, 12e6, 0.03)})")
print("baselines:", baseline_user_counts(cell, 12e6, QoeConstraints(0.01, 0.03), samples=50_000))
