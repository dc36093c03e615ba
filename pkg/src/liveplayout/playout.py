"""Maximum constant playout rate under outage and drop limits, and buffer dimensioning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from liveplayout.queueing import ArrivalPmf, drop_rate, outage_probability, solve_finite, solve_infinite

SLACK = 1e-12
MAX_BUFFER = 10_000_000


@dataclass(frozen=True)
class FrameParams:
    frame_duration: float = 0.010  # seconds
    packet_size: float = 5000.0  # bits

    def __post_init__(self):
        if self.frame_duration <= 0 or self.packet_size <= 0:
            raise ValueError("frame duration and packet size must be positive")

    def packets_per_frame(self, rate_bps: float) -> int:
        """S = floor(U * dt / sigma)."""
        return int(math.floor(rate_bps * self.frame_duration / self.packet_size + 1e-9))

    def rate_of(self, S: int) -> float:
        return S * self.packet_size / self.frame_duration


@dataclass(frozen=True)
class QoeConstraints:
    epsilon: float  # max outage probability
    delta0: float  # max drop rate

    def __post_init__(self):
        for name in ("epsilon", "delta0"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")


@dataclass(frozen=True)
class PlayoutSolution:
    S: int
    U: float  # bits/s
    achieved_outage: float
    achieved_drop: float
    B: int

    def to_json(self) -> dict:
        return {"S": self.S, "U_bps": self.U, "outage": self.achieved_outage, "drop": self.achieved_drop, "B": self.B}


class ConstraintsUnsatisfiable(ValueError):
    """No playout batch meets both limits; ``best`` holds the least-violating (S, outage, drop)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def arrivals_from_rates(rates_bps, probs, frame: FrameParams) -> ArrivalPmf:
    """Arrival PMF of A = floor(C * dt / sigma) for a data-rate PMF ``(rates_bps, probs)``."""
    x = np.asarray(rates_bps, dtype=float) * frame.frame_duration / frame.packet_size
    counts = np.floor(x + 1e-9).astype(np.int64)
    if counts.size and counts.min() < 0:
        raise ValueError("negative data rate")
    pmf = np.bincount(counts, weights=np.asarray(probs, dtype=float))
    return ArrivalPmf(pmf / pmf.sum())


def evaluate(arrivals: ArrivalPmf, S: int, B: int) -> tuple[float, float]:
    """(outage, drop) of a playout batch S with a B-packet buffer."""
    dist = solve_finite(arrivals, S, B)
    return outage_probability(dist, S), drop_rate(dist, arrivals)


def candidate_batches(arrivals: ArrivalPmf, B: int, constraints: QoeConstraints) -> range:
    """Batches S that can possibly be feasible.

    Served packets per frame never exceed S or E[A], and are at least
    S * (1 - outage). Hence drop >= 1 - S/E[A] and outage >= 1 - E[A]/S, which
    bound S from both sides; S beyond the largest arrival count always stalls.
    """
    mean = arrivals.mean
    lo = max(1, math.ceil((1.0 - constraints.delta0) * mean - 1e-9))
    hi = min(B - 1, arrivals.max_arrivals, math.floor(mean / (1.0 - constraints.epsilon) + 1e-9))
    return range(lo, hi + 1)


def _violation(outage, drop, c):
    return max(outage - c.epsilon, 0.0) + max(drop - c.delta0, 0.0)


def max_playout_rate(arrivals: ArrivalPmf, B: int, frame: FrameParams, constraints: QoeConstraints) -> PlayoutSolution:
    """Largest constant playout rate whose outage and drop rate meet ``constraints``.

    Every candidate batch is evaluated with the finite-buffer solver; no
    monotonicity in S is assumed.
    """
    if B <= 1:
        raise ValueError("buffer must hold more than one packet")
    if arrivals.mean <= 0:
        raise ValueError("no arrivals")
    cands = candidate_batches(arrivals, B, constraints)
    results = {}
    for S in cands:
        results[S] = evaluate(arrivals, S, B)
    feasible = [S for S, (o, d) in results.items()
                if o <= constraints.epsilon + SLACK and d <= constraints.delta0 + SLACK]
    if feasible:
        S = max(feasible)
        o, d = results[S]
        return PlayoutSolution(S, frame.rate_of(S), o, d, B)
    if not results:
        # bounds excluded everything; report the edge batches for diagnosis
        edge = {min(max(cands.start, 1), B - 1), min(max(cands.stop - 1, 1), B - 1)}
        results = {S: evaluate(arrivals, S, B) for S in edge}
    S_best = min(results, key=lambda s: (_violation(*results[s], constraints), -s))
    best = (S_best, *results[S_best])
    raise ConstraintsUnsatisfiable(
        f"constraints unsatisfiable: best S={best[0]} has outage={best[1]:.4g}, drop={best[2]:.4g}", best)


def is_feasible(arrivals: ArrivalPmf, S: int, B: int, constraints: QoeConstraints) -> bool:
    o, d = evaluate(arrivals, S, B)
    return o <= constraints.epsilon + SLACK and d <= constraints.delta0 + SLACK


def min_buffer(U: float, arrivals: ArrivalPmf, frame: FrameParams, constraints: QoeConstraints,
               max_buffer: int = MAX_BUFFER) -> int:
    """Smallest buffer B > S (packets) meeting both limits at playout rate U.

    Outage and drop rate are non-increasing in B, so the search doubles B until
    feasible and then bisects.
    """
    S = frame.packets_per_frame(U)
    if S < 1:
        raise ValueError("playout rate below one packet per frame")
    mean = arrivals.mean
    # limits that no buffer size can beat
    if mean <= 0 or 1.0 - S / mean > constraints.delta0 + SLACK or 1.0 - mean / S > constraints.epsilon + SLACK:
        raise ValueError("rate unsustainable")
    if mean < S:
        # outage falls toward the unbounded-buffer value as B grows
        try:
            floor = float(solve_infinite(arrivals, S).boundary_probs.sum())
        except ValueError:
            floor = 0.0
        if floor > constraints.epsilon + SLACK:
            raise ValueError("rate unsustainable")
    lo, hi = S, S + 1
    prev = None
    while True:
        o, d = evaluate(arrivals, S, hi)
        if o <= constraints.epsilon + SLACK and d <= constraints.delta0 + SLACK:
            break
        # drop is met and outage has settled: more buffer will not help
        if d <= constraints.delta0 + SLACK and prev is not None and prev - o <= 1e-9 * max(o, 1e-300):
            raise ValueError("rate unsustainable")
        prev = o
        lo = hi
        hi *= 2
        if hi > max_buffer:
            if is_feasible(arrivals, S, max_buffer, constraints):
                hi = max_buffer
                break
            raise ValueError("rate unsustainable")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if is_feasible(arrivals, S, mid, constraints):
            hi = mid
        else:
            lo = mid
    return hi


def buffer_from_seconds(L: float, U: float, packet_size: float) -> int:
    """Buffer of L seconds of content at playout rate U, in packets."""
    if L <= 0 or U <= 0 or packet_size <= 0:
        raise ValueError("duration, rate and packet size must be positive")
    B = int(math.floor(U * L / packet_size + 1e-9))
    if B <= 1:
        raise ValueError("buffer too small")
    return B
