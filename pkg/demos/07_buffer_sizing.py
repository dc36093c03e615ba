"""
How much buffer does a steady rate need?
----------------------------------------
For a fixed playout rate, the drop rate falls as the buffer grows. Users
with steadier channels (small coefficient of variation) need far less
buffered video. Buffer size is expressed as seconds of content at U.
Rates sit near each user's mean arrival rate. Below the mean the drop rate
never falls under 1 - S/E[A], however large the buffer; user 4 is steady
enough that this floor is already small.

    python3 demos/07_buffer_sizing.py
"""

from liveplayout.allocation import static_share_arrivals
from liveplayout.channel import rate_cv
from liveplayout.data import K_BLOCKS, amsterdam_pmf
from liveplayout.playout import FrameParams, QoeConstraints, buffer_from_seconds, evaluate, min_buffer

frame = FrameParams()
for user, U in ((4, 16.0e6), (1, 5.0e6), (5, 18.0e6)):
    pmf = amsterdam_pmf(user)
    arr = static_share_arrivals(pmf, K_BLOCKS, 1 / 8, frame)
    S = frame.packets_per_frame(U)
    print(f"user {user} (cv {rate_cv(pmf):.2f}) at {U / 1e6:.1f} Mb/s, mean arrivals {arr.mean:.1f} vs S={S}")
    for L in (0.5, 1.0, 2.5, 4.5):
        B = buffer_from_seconds(L, U, frame.packet_size)
        o, d = evaluate(arr, S, B)
        print(f"  {L:>3} s -> B={B:>5} packets  drop {d:.4f}  outage {o:.4f}")
    try:
        print("  smallest buffer for drop <= 1%, outage <= 5%:",
              min_buffer(U, arr, frame, QoeConstraints(0.05, 0.01)), "packets")
    except ValueError as exc:
        print("  ", exc)
