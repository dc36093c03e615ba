"""Reference inputs: the 15-level MCS table and the eight Amsterdam user PMFs.

Per-block rates are stored in bits/s. Each ``AMSTERDAM_PROBS`` row lists the
probability of every MCS level for one user; zero entries are dropped when a
row is turned into a :class:`~liveplayout.channel.RatePmf`.
"""

from liveplayout.channel import McsTable, RatePmf

MCS_THRESHOLDS_DB = (
    -9.5, -6.7, -4.1, -1.8, 0.4, 2.4, 4.5, 6.4, 8.5, 10.3, 12.2, 14.1, 15.8, 17.8, 19.8,
)
MCS_RATES_KBPS = (
    48.0, 73.6, 121.8, 192.2, 282.0, 378.0, 474.2, 712.0, 772.2, 874.8,
    1063.8, 1249.6, 1448.4, 1640.6, 1778.4,
)

AMSTERDAM_PROBS = {
    1: (0, 0.1, 0.72, 0.04, 0.05, 0.09, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    2: (0, 0, 0.2, 0.7, 0.1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    3: (0, 0, 0, 0, 0.02, 0.12, 0.51, 0.32, 0.01, 0.01, 0.01, 0, 0, 0, 0),
    4: (0, 0, 0, 0, 0, 0.01, 0.98, 0.01, 0, 0, 0, 0, 0, 0, 0),
    5: (0.22, 0.04, 0.07, 0.04, 0.04, 0.06, 0.17, 0.15, 0.01, 0.01, 0.06, 0.06, 0, 0.03, 0.04),
    6: (0.17, 0.11, 0.1, 0.07, 0.05, 0.1, 0.17, 0.11, 0.02, 0.04, 0, 0.03, 0, 0.02, 0.01),
    7: (0.05, 0.03, 0.06, 0.07, 0.09, 0.17, 0.33, 0.08, 0.01, 0.01, 0.01, 0.03, 0.01, 0.03, 0.02),
    8: (0, 0, 0, 0.02, 0.01, 0.03, 0.06, 0.08, 0.01, 0.02, 0.01, 0.03, 0, 0.05, 0.68),
}

# Cell parameters used by the trace study.
K_BLOCKS = 275
FRAME_SECONDS = 0.010
PACKET_BITS = 5000.0
BUFFER_PACKETS = 4800  # 3 MB / 5 kb
EVENT_FRAMES = 900_000  # 2.5 h of 10 ms frames


def mcs_table():
    return McsTable(MCS_THRESHOLDS_DB, tuple(r * 1e3 for r in MCS_RATES_KBPS))


def amsterdam_pmf(user):
    """Per-block rate PMF of Amsterdam user ``user`` (1..8)."""
    probs = AMSTERDAM_PROBS[user]
    support = [r * 1e3 for r, p in zip(MCS_RATES_KBPS, probs) if p > 0]
    return RatePmf(support, [p for p in probs if p > 0])


def amsterdam_users():
    return {u: amsterdam_pmf(u) for u in AMSTERDAM_PROBS}
