"""Frame-level playout buffer simulator.

Random numbers come from numpy's PCG64 generator. Run ``r`` of a
configuration seeded with ``seed`` uses ``SeedSequence(seed, spawn_key=(r,))``,
so every replication is reproducible on its own and summaries do not depend
on the order runs are executed in.

At the start of frame t the buffer holds Q(t) packets (the previous frame's
arrivals included). The frame is an outage frame when Q(t) < S. Playout takes
min(Q(t), S) packets, then the frame's A(t) arrivals are queued and any
excess over B packets is dropped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from liveplayout.channel import McsTable, RatePmf, TraceRecord, map_sinr_to_rate, record_sinr
from liveplayout.playout import FrameParams, QoeConstraints
from liveplayout.queueing import ArrivalPmf


@dataclass(frozen=True)
class AbrParams:
    b_min: float  # packets
    b_max: float  # packets
    theta: float
    u_init: float  # bits/s
    u_floor: float | None = None
    u_ceil: float | None = None

    def __post_init__(self):
        if not 0 < self.b_min < self.b_max:
            raise ValueError("need 0 < b_min < b_max")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0, 1)")
        if self.u_init <= 0:
            raise ValueError("u_init must be positive")

    @classmethod
    def scenario(cls, B: int, low: float, high: float, theta: float, u_init: float) -> "AbrParams":
        """Thresholds given as fractions of the buffer size."""
        return cls(low * B, high * B, theta, u_init)


@dataclass
class RunStats:
    frames: int
    outage_frames: int
    arrived: float
    played: float
    dropped: float
    final_occupancy: float
    mean_playout: float
    playout_variance: float

    @property
    def outage(self) -> float:
        return self.outage_frames / self.frames

    @property
    def drop(self) -> float:
        return self.dropped / self.arrived if self.arrived > 0 else 0.0


@dataclass
class SimReport:
    empirical_outage: float
    empirical_drop: float
    mean_playout: float  # bits/s
    playout_variance: float  # (bits/s)^2
    qoe: float  # Mbps
    runs: list = field(default_factory=list)

    def to_json(self) -> dict:
        doc = asdict(self)
        for r, run in zip(doc["runs"], self.runs):
            r["outage"], r["drop"] = run.outage, run.drop
        return doc


def run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run,)))


def draw_arrivals(source, frames: int, rng: np.random.Generator, offset: int = 0) -> np.ndarray:
    """Per-frame arrival counts: i.i.d. from an ArrivalPmf, or a sequence replayed cyclically."""
    if isinstance(source, ArrivalPmf):
        return source.sample(rng, frames)
    seq = np.asarray(source)
    if seq.size == 0:
        raise ValueError("empty trace")
    idx = (offset + np.arange(frames)) % seq.size
    return seq[idx]


def _constant_run(arrivals: Sequence[int], S: int, B: int, dump=None) -> RunStats:
    q = 0
    outage = played = dropped = 0
    for t, a in enumerate(arrivals):
        if q < S:
            outage += 1
            out = q
        else:
            out = S
        q = q - out + a
        drop = q - B if q > B else 0
        q -= drop
        played += out
        dropped += drop
        if dump is not None:
            dump.append((t, q, a, out, drop))
    n = len(arrivals)
    arrived = int(np.sum(arrivals))
    return RunStats(n, outage, arrived, played, dropped, q, 0.0, 0.0)


def _summarize(runs: list[RunStats], eta: float) -> SimReport:
    outage = float(np.mean([r.outage for r in runs]))
    drop = float(np.mean([r.drop for r in runs]))
    mean_u = float(np.mean([r.mean_playout for r in runs]))
    var_u = float(np.mean([r.playout_variance for r in runs]))
    qoe = float(np.mean([r.mean_playout / 1e6 - eta * r.playout_variance / 1e12 for r in runs]))
    return SimReport(outage, drop, mean_u, var_u, qoe, runs)


def simulate_constant(source, S: int, B: int, frames: int, seed: int = 0, runs: int = 1,
                      frame: FrameParams | None = None, eta: float = 0.05, dump_path=None) -> SimReport:
    """Replay Q(t+1) = min(B, max(S, Q(t)) - S + A(t)) from an empty buffer."""
    if S < 1 or B < 1 or frames < 1 or runs < 1:
        raise ValueError("S, B, frames and runs must be positive")
    frame = frame or FrameParams()
    U = frame.rate_of(S)
    out = []
    dump = [] if dump_path is not None else None
    for r in range(runs):
        arr = draw_arrivals(source, frames, run_rng(seed, r), offset=r * frames).tolist()
        stats = _constant_run(arr, S, B, dump if r == 0 else None)
        stats.mean_playout, stats.playout_variance = U, 0.0
        out.append(stats)
    if dump is not None:
        write_frame_csv(dump_path, ((t, q, a, o, d, U) for t, q, a, o, d in dump))
    return _summarize(out, eta)


def _abr_run(arrivals, params: AbrParams, B: int, frame: FrameParams, series=None, dump=None) -> RunStats:
    unit = frame.packet_size / frame.frame_duration  # bits/s per packet/frame
    u_floor = params.u_floor if params.u_floor is not None else unit
    u_ceil = params.u_ceil if params.u_ceil is not None else (B / 2) * unit
    down, up = 1.0 - params.theta, 1.0 + params.theta
    b_min, b_max = params.b_min, params.b_max
    u = min(max(params.u_init, u_floor), u_ceil)
    q = 0
    outage = played = dropped = 0
    s1 = s2 = 0.0
    for t, a in enumerate(arrivals):
        S = int(math.floor(u / unit + 1e-9))
        if q < S:
            outage += 1
            out = q
        else:
            out = S
        q = q - out + a
        drop = q - B if q > B else 0
        q -= drop
        played += out
        dropped += drop
        s1 += u
        s2 += u * u
        if series is not None:
            series.append(u)
        if dump is not None:
            dump.append((t, q, a, out, drop, u))
        if q < b_min:
            u = max(u * down, u_floor)
        elif q > b_max:
            u = min(u * up, u_ceil)
    n = len(arrivals)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return RunStats(n, outage, int(np.sum(arrivals)), played, dropped, q, mean, var)


def simulate_abr(source, params: AbrParams, B: int, frames: int, seed: int = 0, runs: int = 1,
                 frame: FrameParams | None = None, eta: float = 0.05, record_series: bool = False,
                 dump_path=None):
    """Two-threshold adaptive playout.

    After each frame's playout and arrivals the rate is multiplied by
    (1 - theta) when occupancy is below b_min and by (1 + theta) when above
    b_max, then clamped to [u_floor, u_ceil]. With ``record_series`` the
    playout series of the first run is returned alongside the report.
    """
    if frames < 1 or runs < 1:
        raise ValueError("frames and runs must be positive")
    frame = frame or FrameParams()
    out = []
    series = [] if record_series else None
    dump = [] if dump_path is not None else None
    for r in range(runs):
        arr = draw_arrivals(source, frames, run_rng(seed, r), offset=r * frames).tolist()
        out.append(_abr_run(arr, params, B, frame, series if r == 0 else None, dump if r == 0 else None))
    if dump is not None:
        write_frame_csv(dump_path, dump)
    report = _summarize(out, eta)
    if record_series:
        return report, np.asarray(series)
    return report


def qoe_score(series_bps, eta: float = 0.05) -> float:
    """Mean playout rate minus eta times its population variance, both in Mbps units."""
    u = np.asarray(series_bps, dtype=float) / 1e6
    if u.size == 0:
        raise ValueError("empty playout series")
    return float(u.mean() - eta * u.var())


def trace_playback_arrivals(trace, table: McsTable | None, share: float, frame: FrameParams, K: float,
                            rssi_to_sinr=None, frames: int | None = None) -> np.ndarray:
    """Arrival counts floor(K * Y * R(t) * dt / sigma) following a trace in order.

    ``trace`` holds TraceRecords (mapped through ``table``) or per-block rates
    in bits/s. With ``frames`` the trace wraps cyclically.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    if isinstance(trace[0], TraceRecord):
        rates = np.atleast_1d(map_sinr_to_rate(record_sinr(trace, rssi_to_sinr), table))
    else:
        rates = np.asarray(trace, dtype=float)
    if frames is not None:
        rates = rates[np.arange(frames) % rates.size]
    x = K * share * rates * frame.frame_duration / frame.packet_size
    return np.floor(x + 1e-9).astype(np.int64)


def iid_rates(pmf: RatePmf, frames: int, rng: np.random.Generator) -> np.ndarray:
    s, p = pmf.as_arrays()
    return s[rng.choice(s.size, size=frames, p=p)]


def simulate_variable_packets(rates_bps: Sequence[float], U: float, B: int, frame: FrameParams,
                              seed: int = 0, spread: float = 0.2) -> RunStats:
    """Constant playout at U bits/s with packet sizes uniform in sigma*(1 +/- spread).

    ``rates_bps`` is the user's data rate in each frame. The buffer is counted
    in bits with capacity B*sigma; packets arrive whole (partial packets carry
    over to the next frame) and playout removes whole packets. Drop rate is
    measured in bits.
    """
    rng = run_rng(seed, 0)
    sigma = frame.packet_size
    cap = B * sigma
    budget_per_frame = U * frame.frame_duration
    n_est = int(np.sum(rates_bps) * frame.frame_duration / (sigma * (1 - spread))) + 16
    sizes = rng.uniform(sigma * (1 - spread), sigma * (1 + spread), size=n_est).tolist()
    k = 0
    buf: list[float] = []
    head = 0
    buf_bits = 0.0
    carry = 0.0
    credit = 0.0
    outage = 0
    arrived = played = dropped = 0.0
    for c in rates_bps:
        if buf_bits < budget_per_frame:
            outage += 1
        budget = budget_per_frame + credit
        while head < len(buf) and buf[head] <= budget:
            budget -= buf[head]
            buf_bits -= buf[head]
            played += buf[head]
            head += 1
        credit = min(budget, buf[head]) if head < len(buf) else 0.0
        if head > 4096:
            del buf[:head]
            head = 0
        bits_in = c * frame.frame_duration + carry
        while k < len(sizes) and sizes[k] <= bits_in:
            s = sizes[k]
            k += 1
            bits_in -= s
            arrived += s
            if buf_bits + s <= cap:
                buf.append(s)
                buf_bits += s
            else:
                dropped += s
        carry = bits_in
    return RunStats(len(rates_bps), outage, arrived, played, dropped, buf_bits, U, 0.0)


def sim_max_playout(source, B: int, constraints: QoeConstraints, frames: int, seed: int = 0,
                    frame: FrameParams | None = None, candidates: Sequence[int] | None = None, runs: int = 1):
    """Largest S whose simulated outage and drop meet ``constraints``.

    Candidates default to the batches around the mean arrival count. Rates are
    averaged over ``runs`` independent runs. Returns ``(S, report)`` or
    ``(None, None)``.
    """
    frame = frame or FrameParams()
    if candidates is None:
        mean = source.mean if isinstance(source, ArrivalPmf) else float(np.mean(source))
        lo = max(1, math.ceil((1 - constraints.delta0) * mean) - 1)
        hi = math.floor(mean / (1 - constraints.epsilon)) + 1
        candidates = range(lo, min(hi, B - 1) + 1)
    for S in sorted(candidates, reverse=True):
        rep = simulate_constant(source, S, B, frames, seed, runs, frame=frame)
        if rep.empirical_outage <= constraints.epsilon and rep.empirical_drop <= constraints.delta0:
            return S, rep
    return None, None


def sim_share_evaluator(pmf: RatePmf, K: float, frame: FrameParams, B: int, frames: int, seed: int = 0):
    """``evaluate_share`` callable backed by simulation.

    One i.i.d. rate sequence is drawn up front and reused for every frame
    ratio, so the simulated outage is monotone in the share.
    """
    rates = iid_rates(pmf, frames, run_rng(seed, 0))

    def f(Y, S):
        arr = trace_playback_arrivals(rates, None, Y, frame, K).tolist()
        st = _constant_run(arr, S, B)
        return st.outage, st.drop
    return f


def write_frame_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "occupancy", "arrived", "played", "dropped", "rate_bps"])
        w.writerows(rows)
