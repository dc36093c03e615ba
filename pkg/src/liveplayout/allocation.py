"""Frame-ratio allocation for three operator objectives.

* equal experience: every user receives the same data rate K / sum_j(1/R_j)
  in every frame, and the common playout rate comes from the queue solver;
* maximum users at a target rate: static minimum shares for everyone, the
  leftover spent on upgrading the users with the best mean channels;
* two classes: a block split between premium and regular users with
  U_p = k_p * U_r.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from liveplayout.channel import RatePmf, mean_rate
from liveplayout.playout import (
    ConstraintsUnsatisfiable,
    FrameParams,
    PlayoutSolution,
    QoeConstraints,
    arrivals_from_rates,
    max_playout_rate,
)
from liveplayout.queueing import ArrivalPmf

log = logging.getLogger(__name__)

DEFAULT_BINS = 2 ** 14
MAX_BINS = 2 ** 24
FLOOR_FRACTION = 0.1  # zero-rate frames count as r_1 * FLOOR_FRACTION
EXACT_ATOM_LIMIT = 2_000_000


@dataclass(frozen=True)
class CellConfig:
    users: tuple  # ((user_id, RatePmf), ...)
    K: float
    frame: FrameParams = field(default_factory=FrameParams)
    B: int = 4800

    def __post_init__(self):
        users = tuple((uid, pmf) for uid, pmf in self.users)
        if not users:
            raise ValueError("cell needs at least one user")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        object.__setattr__(self, "users", users)

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def pmfs(self) -> list[RatePmf]:
        return [p for _, p in self.users]

    @property
    def ids(self) -> list:
        return [u for u, _ in self.users]


@dataclass(frozen=True)
class AllocationPlan:
    kind: str  # "dynamic-inverse" or "static"
    static_shares: dict = field(default_factory=dict)
    leftover: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dynamic-inverse", "static"):
            raise ValueError(f"unknown plan kind {self.kind!r}")
        if self.kind == "static":
            total = sum(self.static_shares.values())
            if any(not 0.0 <= y <= 1.0 for y in self.static_shares.values()) or total > 1.0 + 1e-12:
                raise ValueError("static shares must lie in [0, 1] and sum to at most 1")

    def to_json(self) -> dict:
        return {"kind": self.kind, "shares": {str(k): v for k, v in self.static_shares.items()},
                "leftover": self.leftover}


@dataclass(frozen=True)
class TwoClassConfig:
    premium: tuple
    regular: tuple
    k_p: float = 1.0
    delta_p: float = 0.01
    delta_r: float = 0.01
    epsilon_p: float = 0.1
    epsilon_r: float = 0.1

    def __post_init__(self):
        if not self.premium or not self.regular:
            raise ValueError("both classes need at least one user")
        if self.k_p < 1:
            raise ValueError("k_p must be at least 1")
        for name in ("delta_p", "delta_r", "epsilon_p", "epsilon_r"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.delta_r < self.delta_p or self.epsilon_r < self.epsilon_p:
            raise ValueError("regular-class targets must be at least the premium ones")
        object.__setattr__(self, "premium", tuple(self.premium))
        object.__setattr__(self, "regular", tuple(self.regular))


@dataclass(frozen=True)
class TwoClassSplit:
    K_p: int
    K_r: float
    c: float
    U_p: float
    U_r: float
    E1: float  # regular class E[1 / sum 1/R]
    E2: float  # premium class E[1 / sum 1/R]

    def to_json(self) -> dict:
        return dict(self.__dict__)


# --- equal experience -------------------------------------------------------


def dynamic_share(rates_this_frame: Sequence[float]) -> np.ndarray:
    """Frame ratios inversely proportional to each user's per-block rate."""
    r = np.asarray(rates_this_frame, dtype=float)
    if np.any(r <= 0):
        raise ValueError("user in outage frame")
    inv = 1.0 / r
    return inv / inv.sum()


def _reciprocal_atoms(pmf: RatePmf, floor_fraction: float):
    s, p = pmf.as_arrays()
    floor = s[s > 0].min() * floor_fraction if np.any(s > 0) else None
    if np.any(s <= 0):
        if floor is None:
            raise ValueError("user has no positive rate")
        s = np.where(s > 0, s, floor)
    return 1.0 / s, p


def reciprocal_sum_distribution(pmfs: Sequence[RatePmf], nbins: int = DEFAULT_BINS,
                                floor_fraction: float = FLOOR_FRACTION):
    """Distribution of sum_j 1/R_j on a uniform grid.

    Users are added one at a time; atoms falling in the same bin merge into
    their mass-weighted mean, so total mass is conserved and a bin holding a
    single atom keeps it exactly. Returns ``(locations, masses)``.
    """
    if nbins > MAX_BINS:
        raise ValueError(f"grid of {nbins} bins overflows; use at most {MAX_BINS} bins")
    loc = np.zeros(1)
    mass = np.ones(1)
    for pmf in pmfs:
        inv, p = _reciprocal_atoms(pmf, floor_fraction)
        new_loc = (loc[:, None] + inv[None, :]).ravel()
        new_mass = (mass[:, None] * p[None, :]).ravel()
        keep = new_mass > 0
        new_loc, new_mass = new_loc[keep], new_mass[keep]
        lo, hi = new_loc.min(), new_loc.max()
        if hi > lo:
            idx = np.minimum(((new_loc - lo) / (hi - lo) * nbins).astype(np.int64), nbins - 1)
        else:
            idx = np.zeros(new_loc.size, dtype=np.int64)
        m = np.bincount(idx, weights=new_mass, minlength=nbins)
        first = np.bincount(idx, weights=new_mass * new_loc, minlength=nbins)
        nz = m > 0
        loc, mass = first[nz] / m[nz], m[nz]
    return loc, mass


def equal_experience_arrivals(cell: CellConfig, nbins: int = DEFAULT_BINS,
                              floor_fraction: float = FLOOR_FRACTION) -> ArrivalPmf:
    """Arrival PMF common to all users when each frame gives everyone K / sum_j(1/R_j)."""
    loc, mass = reciprocal_sum_distribution(cell.pmfs, nbins, floor_fraction)
    return arrivals_from_rates(cell.K / loc, mass, cell.frame)


def equal_experience_rate(cell: CellConfig, constraints: QoeConstraints, nbins: int = DEFAULT_BINS) -> PlayoutSolution:
    """Highest playout rate every user in the cell gets under the inverse-rate rule."""
    return max_playout_rate(equal_experience_arrivals(cell, nbins), cell.B, cell.frame, constraints)


def harmonic_rate_mean(pmfs: Sequence[RatePmf], method: str = "auto", samples: int = 1_000_000,
                       seed: int = 0, nbins: int = DEFAULT_BINS, floor_fraction: float = FLOOR_FRACTION) -> float:
    """E[1 / sum_j 1/R_j] over independent per-block rates (bits/s).

    ``method`` is ``"exact"`` (enumerate all joint atoms), ``"grid"``,
    ``"mc"`` or ``"auto"`` (exact when the joint support is small enough,
    otherwise Monte Carlo).
    """
    atoms = [_reciprocal_atoms(p, floor_fraction) for p in pmfs]
    n_joint = math.prod(int(np.count_nonzero(p)) for _, p in atoms)
    if method == "auto":
        method = "exact" if n_joint <= EXACT_ATOM_LIMIT else "mc"
    if method == "exact":
        tot = np.zeros(1)
        prob = np.ones(1)
        for inv, p in atoms:
            keep = p > 0
            tot = (tot[:, None] + inv[keep][None, :]).ravel()
            prob = (prob[:, None] * p[keep][None, :]).ravel()
        return float(np.dot(prob, 1.0 / tot))
    if method == "grid":
        loc, mass = reciprocal_sum_distribution(pmfs, nbins, floor_fraction)
        return float(np.dot(mass, 1.0 / loc))
    if method == "mc":
        rng = np.random.default_rng(seed)
        tot = np.zeros(samples)
        for inv, p in atoms:
            tot += inv[rng.choice(inv.size, size=samples, p=p)]
        return float(np.mean(1.0 / tot))
    raise ValueError(f"unknown method {method!r}")


# --- minimum rate / maximum users -------------------------------------------


def min_rate_share(U_min: float, delta0: float, K: float, pmf: RatePmf) -> float:
    """Static frame ratio giving a mean delivered rate of U_min after drops.

    A value above 1 means the user cannot be served even with the whole frame.
    """
    er = mean_rate(pmf)
    if er <= 0:
        raise ValueError("mean per-block rate must be positive")
    return U_min / ((1.0 - delta0) * K * er)


def upgrade_cost(U_min: float, U_max: float, delta0: float, K: float, pmf: RatePmf) -> float:
    """Extra frame ratio that lifts a user from U_min to U_max."""
    return (U_max - U_min) / ((1.0 - delta0) * K * mean_rate(pmf))


def admission_control(cell: CellConfig, U_min: float, delta0: float):
    """Largest set of users whose minimum shares fit in one frame.

    Admitting the cheapest users first maximizes the count. Returns
    ``(admitted_ids, shares, leftover)``.
    """
    need = {uid: min_rate_share(U_min, delta0, cell.K, pmf) for uid, pmf in cell.users}
    order = sorted(need, key=lambda u: (need[u], str(u)))
    admitted, total = [], 0.0
    for uid in order:
        if total + need[uid] <= 1.0 + 1e-12:
            admitted.append(uid)
            total += need[uid]
        else:
            break
    shares = {u: need[u] for u in admitted}
    return admitted, shares, max(0.0, 1.0 - total)


def max_users_max_resolution(cell: CellConfig, U_min: float, U_max: float, delta0: float):
    """Most users that can be lifted to U_max while everyone keeps U_min.

    Upgrade cost is inversely proportional to E[R_i], so users are taken in
    decreasing order of mean per-block rate (ties by id). Returns
    ``(N, selected_ids, plan)``.
    """
    if U_max < U_min:
        raise ValueError("U_max must be at least U_min")
    base = {uid: min_rate_share(U_min, delta0, cell.K, pmf) for uid, pmf in cell.users}
    leftover = 1.0 - sum(base.values())
    if leftover < -1e-12:
        raise ValueError("minimum shares exceed the frame; run admission_control first")
    ranked = sorted(cell.users, key=lambda up: (-mean_rate(up[1]), str(up[0])))
    selected, spent = [], 0.0
    for uid, pmf in ranked:
        cost = upgrade_cost(U_min, U_max, delta0, cell.K, pmf)
        if spent + cost > leftover + 1e-12:
            break
        selected.append(uid)
        spent += cost
    shares = dict(base)
    for uid, pmf in cell.users:
        if uid in selected:
            shares[uid] += upgrade_cost(U_min, U_max, delta0, cell.K, pmf)
    plan = AllocationPlan("static", shares, max(0.0, leftover - spent))
    return len(selected), selected, plan


def brute_force_max_users(cell: CellConfig, U_min: float, U_max: float, delta0: float) -> int:
    """Exhaustive check of the greedy count over all user subsets (small n only)."""
    leftover = 1.0 - sum(min_rate_share(U_min, delta0, cell.K, p) for p in cell.pmfs)
    costs = [upgrade_cost(U_min, U_max, delta0, cell.K, p) for p in cell.pmfs]
    best = 0
    for r in range(cell.n + 1):
        for combo in itertools.combinations(costs, r):
            if sum(combo) <= leftover + 1e-12:
                best = max(best, r)
    return best


# --- baselines for the maximum-users objective ------------------------------


def _sample_rates(cell: CellConfig, rng: np.random.Generator, samples: int) -> np.ndarray:
    out = np.empty((samples, cell.n))
    for j, pmf in enumerate(cell.pmfs):
        s, p = pmf.as_arrays()
        out[:, j] = s[rng.choice(s.size, size=samples, p=p)]
    return out


def _users_reaching(rate_samples: np.ndarray, cell: CellConfig, U_max: float, constraints: QoeConstraints) -> int:
    count = 0
    for j in range(rate_samples.shape[1]):
        vals, cnt = np.unique(rate_samples[:, j], return_counts=True)
        arrivals = arrivals_from_rates(vals, cnt / cnt.sum(), cell.frame)
        try:
            sol = max_playout_rate(arrivals, cell.B, cell.frame, constraints)
        except ConstraintsUnsatisfiable:
            continue
        if sol.U >= U_max - 1e-9:
            count += 1
    return count


def baseline_user_counts(cell: CellConfig, U_max: float, constraints: QoeConstraints,
                         samples: int = 200_000, seed: int = 0) -> dict:
    """Users reaching U_max under three reference policies.

    * ``equal``: static share 1/n each;
    * ``constant_then_redistribute``: the largest common constant data rate
      that fits in the frame with probability 1 - epsilon, leftover frame
      split equally;
    * ``proportional``: Y_i = R_i / sum_j R_j.

    Per-user data-rate laws are estimated from ``samples`` seeded frames.
    """
    rng = np.random.default_rng(seed)
    R = _sample_rates(cell, rng, samples)
    K, n = cell.K, cell.n
    out = {}
    out["equal"] = _users_reaching(K * R / n, cell, U_max, constraints)

    need_per_bps = (1.0 / (K * R)).sum(axis=1)  # frame ratio per bit/s of common rate
    c_star = float(np.quantile(1.0 / need_per_bps, constraints.epsilon))
    used = c_star * need_per_bps
    scale = np.minimum(1.0, 1.0 / used)
    spare = np.maximum(0.0, 1.0 - used)
    C = c_star * scale[:, None] + K * R * spare[:, None] / n
    out["constant_then_redistribute"] = _users_reaching(C, cell, U_max, constraints)

    out["proportional"] = _users_reaching(K * R ** 2 / R.sum(axis=1, keepdims=True), cell, U_max, constraints)
    return out


# --- two classes -------------------------------------------------------------


def two_class_split(cfg: TwoClassConfig, K: float, method: str = "auto", **kw) -> TwoClassSplit:
    """Block split and guaranteed playout rates for premium and regular users.

    K_p is floored to whole blocks and the remainder goes to the regular
    class; the rates use the continuous split.
    """
    E1 = harmonic_rate_mean(cfg.regular, method, **kw)
    E2 = harmonic_rate_mean(cfg.premium, method, **kw)
    if not (np.isfinite(E1) and np.isfinite(E2)) or E1 <= 0 or E2 <= 0:
        raise ValueError("class expectation not computable")
    c = cfg.k_p * (1.0 - cfg.delta_r) / (1.0 - cfg.delta_p) * E1 / E2
    U_p = (1.0 - cfg.delta_p) * c * K / (1.0 + c) * E2
    U_r = (1.0 - cfg.delta_r) * K / (1.0 + c) * E1
    K_p = int(math.floor(c * K / (1.0 + c) + 1e-9))
    return TwoClassSplit(K_p, K - K_p, c, U_p, U_r, E1, E2)


def class_arrivals(pmfs: Sequence[RatePmf], K_class: float, frame: FrameParams,
                   nbins: int = DEFAULT_BINS) -> ArrivalPmf:
    """Arrival PMF of a class served by the inverse-rate rule on K_class blocks."""
    return equal_experience_arrivals(CellConfig(tuple(enumerate(pmfs)), K_class, frame), nbins)


def static_share_arrivals(pmf: RatePmf, K: float, share: float, frame: FrameParams) -> ArrivalPmf:
    """Arrival PMF of a user holding a fixed frame ratio ``share``."""
    s, p = pmf.as_arrays()
    return arrivals_from_rates(K * share * s, p, frame)


def cell_from_mapping(users: Mapping, K: float, frame: FrameParams | None = None, B: int = 4800) -> CellConfig:
    return CellConfig(tuple(users.items()), K, frame or FrameParams(), B)


def min_share_search(evaluate_share, S: int, constraints: QoeConstraints, tol: float = 1e-4,
                     hi: float = 1.0):
    """Smallest frame ratio at which a batch of S packets per frame stalls at most epsilon of the time.

    ``evaluate_share(Y, S)`` returns ``(outage, drop)``. Outage cannot grow
    with Y (arrivals grow pathwise), so the search bisects on outage alone.
    Returns ``(Y, outage, drop)``; the caller decides whether the drop rate
    at Y is acceptable. Raises ``ValueError`` if even ``hi`` stalls too often.
    """
    o, _ = evaluate_share(hi, S)
    if o > constraints.epsilon:
        raise ValueError("target rate unreachable within the frame")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if evaluate_share(mid, S)[0] <= constraints.epsilon:
            hi = mid
        else:
            lo = mid
    o, d = evaluate_share(hi, S)
    return hi, o, d


def analytic_share_evaluator(pmf: RatePmf, K: float, frame: FrameParams, B: int):
    """``evaluate_share`` callable backed by the finite-buffer solver."""
    from liveplayout.playout import evaluate

    def f(Y, S):
        arr = static_share_arrivals(pmf, K, Y, frame)
        if arr.mean <= 0:
            return 1.0, 0.0
        return evaluate(arr, S, B)
    return f
