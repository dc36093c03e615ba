"""
Premium and regular subscribers
-------------------------------
Users 6-8 pay for k_p times the playout rate of users 1-5. Blocks are split
between the classes and each class runs the equal-experience rule inside
its own share. The premium rate grows with k_p, but less than linearly.

    python3 demos/05_two_classes.py
"""

from liveplayout.allocation import TwoClassConfig, class_arrivals, two_class_split
from liveplayout.data import BUFFER_PACKETS, K_BLOCKS, amsterdam_pmf
from liveplayout.playout import FrameParams, QoeConstraints
from liveplayout.sim import sim_max_playout

frame = FrameParams()
prem = tuple(amsterdam_pmf(u) for u in (6, 7, 8))
reg = tuple(amsterdam_pmf(u) for u in (1, 2, 3, 4, 5))
c = QoeConstraints(0.1, 0.01)

print(" k_p   K_p    U_p    U_r   (Mb/s, closed form)   simulated U_p")
for k in (1, 2, 3, 4):
    sp = two_class_split(TwoClassConfig(prem, reg, float(k)), K_BLOCKS)
    S, _ = sim_max_playout(class_arrivals(prem, sp.K_p, frame), BUFFER_PACKETS, c, 200_000, seed=2, frame=frame)
    sim = f"{frame.rate_of(S) / 1e6:.1f}" if S else "-"
    print(f"{k:>4} {sp.K_p:>5} {sp.U_p / 1e6:6.2f} {sp.U_r / 1e6:6.2f}   {'':20} {sim}")
