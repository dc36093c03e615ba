"""
Constant playout vs a buffer-threshold ABR player
-------------------------------------------------
Each user plays at its guaranteed constant rate, or starts at the
equal-experience rate and steps up or down by theta whenever the buffer
leaves [B_min, B_max]. The score is mean rate minus 0.05 times the
variance of the rate (both in Mb/s). Short runs keep this quick; the
acceptance suite uses full-length runs.

    python3 demos/06_constant_vs_abr.py
"""

from liveplayout.allocation import cell_from_mapping, equal_experience_rate, static_share_arrivals
from liveplayout.data import BUFFER_PACKETS, K_BLOCKS, amsterdam_pmf, amsterdam_users
from liveplayout.playout import ConstraintsUnsatisfiable, FrameParams, QoeConstraints, max_playout_rate
from liveplayout.sim import AbrParams, simulate_abr, simulate_constant

frame = FrameParams()
B, frames = BUFFER_PACKETS, 100_000
c = QoeConstraints(0.01, 0.03)
u_init = equal_experience_rate(cell_from_mapping(amsterdam_users(), K_BLOCKS), c).U
scenarios = {"sc1": (0.25, 0.75, 0.10), "sc2": (0.30, 0.80, 0.05), "sc3": (0.35, 0.85, 0.20)}

print(f"ABR starts at {u_init / 1e6:.1f} Mb/s")
print("user  const QoE  " + "  ".join(f"{k} QoE (drop, outage)" for k in scenarios))
for user in range(1, 9):
    arr = static_share_arrivals(amsterdam_pmf(user), K_BLOCKS, 1 / 8, frame)
    try:
        S = max_playout_rate(arr, B, frame, c).S
    except ConstraintsUnsatisfiable as exc:
        S = exc.best[0]  # closest we can get
    const = simulate_constant(arr, S, B, frames, seed=4)
    cells = []
    for lo, hi, theta in scenarios.values():
        rep = simulate_abr(arr, AbrParams.scenario(B, lo, hi, theta, u_init), B, frames, seed=4)
        cells.append(f"{rep.qoe:7.2f} ({rep.empirical_drop:.3f}, {rep.empirical_outage:.3f})")
    print(f"{user:>4} {const.qoe:10.2f}  " + "  ".join(cells))
