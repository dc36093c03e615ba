"""
From a signal-strength trace to per-block rate distributions
------------------------------------------------------------
Builds a synthetic RSSI trace (one user per Amsterdam row), writes it as CSV,
reads it back and estimates each user's per-block rate PMF. The estimate
should land on the tabulated frequencies exactly, since the trace was laid
out with them.

    python3 demos/01_channel_pmfs.py
"""

import tempfile
from pathlib import Path

import numpy as np

from liveplayout.channel import TraceRecord, default_mapping, estimate_pmf, mean_rate, rate_cv, read_trace_csv, write_trace_csv
from liveplayout.data import AMSTERDAM_PROBS, MCS_THRESHOLDS_DB, amsterdam_pmf, mcs_table

table = mcs_table()
mapping = default_mapping(table)

# SINR at the middle of each MCS interval, shifted into the RSSI domain
th = list(MCS_THRESHOLDS_DB) + [MCS_THRESHOLDS_DB[-1] + 2.0]
mid_sinr = np.array([(a + b) / 2 for a, b in zip(th, th[1:])])

records = []
rng = np.random.default_rng(0)
for user, row in AMSTERDAM_PROBS.items():
    counts = np.rint(np.asarray(row) * 100).astype(int)
    rssi = rng.permutation(np.repeat(mid_sinr - 95.0, counts))
    records += [TraceRecord(10.0 * k, str(user), rssi_dbm=float(r)) for k, r in enumerate(rssi)]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trace.csv"
    write_trace_csv(path, records)
    traces = read_trace_csv(path)

print(f"{'user':>4} {'samples':>7} {'E[R] kb/s':>10} {'cv':>5}  matches table")
for uid in sorted(traces, key=int):
    pmf = estimate_pmf(traces[uid], table, mapping)
    ref = amsterdam_pmf(int(uid))
    same = pmf.support == ref.support and np.allclose(pmf.probs, ref.probs)
    print(f"{uid:>4} {len(traces[uid]):>7} {mean_rate(pmf) / 1e3:>10.1f} {rate_cv(pmf):>5.2f}  {same}")
