"""
Highest constant playout rate for a user
----------------------------------------
Users 1 and 8 each hold one eighth of the frame. For every outage limit we
solve the finite-buffer queue over candidate batch sizes S and keep the
largest one that meets both the outage and drop targets. A simulation run
checks the answer. User 1 sits close to full load, so its buffer drifts
slowly and the simulated outage needs long runs to settle.

    python3 demos/02_max_playout.py
"""

from liveplayout.allocation import static_share_arrivals
from liveplayout.data import BUFFER_PACKETS, K_BLOCKS, amsterdam_pmf
from liveplayout.playout import FrameParams, QoeConstraints, max_playout_rate
from liveplayout.queueing import queue_report
from liveplayout.sim import simulate_constant

frame = FrameParams()
B = BUFFER_PACKETS

for user in (1, 8):
    arr = static_share_arrivals(amsterdam_pmf(user), K_BLOCKS, 1 / 8, frame)
    print(f"user {user}: mean arrivals {arr.mean:.2f} packets/frame")
    for eps in (0.01, 0.03, 0.05, 0.08, 0.1):
        sol = max_playout_rate(arr, B, frame, QoeConstraints(eps, 0.03))
        sim = simulate_constant(arr, sol.S, B, 900_000, seed=1)
        print(f"  eps={eps:<5} S={sol.S:<4} U={sol.U / 1e6:6.2f} Mb/s  "
              f"outage {sol.achieved_outage:.4f} (sim {sim.empirical_outage:.4f})  "
              f"drop {sol.achieved_drop:.4f} (sim {sim.empirical_drop:.4f})")

# the infinite-buffer side: interior roots of z^S = A(z) and the boundary probabilities
doc = queue_report(static_share_arrivals(amsterdam_pmf(1), K_BLOCKS, 1 / 8, frame), 10, 200)
print("\nuser 1, S=10: |roots| =", ", ".join(f"{abs(complex(*r)):.3f}" for r in doc["roots"]))
