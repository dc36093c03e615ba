"""Discrete-time batch-arrival queue with deterministic service of S packets per frame.

The buffer state is observed at the start of each frame, after the previous
frame's arrivals and before playout resumes:

    Q(t+1) = min(B, max(S, Q(t)) - S + A(t))

with ``A(t)`` i.i.d. For an unbounded buffer the boundary probabilities
``q_0..q_{S-1}`` follow from the roots of ``z^S - A(z)`` inside the unit disk;
for a buffer of B packets the stationary law comes from the (B+1)-state chain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

PROB_TOL = 1e-9
ROOT_RESIDUAL_TOL = 1e-9
UNIT_CIRCLE_BAND = 1e-10
IMAG_TOL = 1e-8
STEADY_STATE_TOL = 1e-10


class ArrivalPmf:
    """Distribution of the number of packets arriving in one frame.

    ``probs[i]`` is the probability of ``i`` arrivals. Trailing zeros are trimmed.
    """

    __slots__ = ("probs", "mean")

    def __init__(self, probs: Sequence[float]):
        p = np.array(probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("empty arrival distribution")
        if np.any(p < 0):
            raise ValueError("arrival probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"arrival probabilities sum to {p.sum()!r}, not 1")
        nz = np.flatnonzero(p)
        p = p[: nz[-1] + 1]
        p.setflags(write=False)
        self.probs = p
        self.mean = float(np.dot(np.arange(p.size), p))

    @classmethod
    def from_atoms(cls, atoms: Mapping[int, float]) -> "ArrivalPmf":
        """Build from ``{count: probability}``; repeated mass is not allowed."""
        if not atoms:
            raise ValueError("empty arrival distribution")
        top = max(atoms)
        if min(atoms) < 0:
            raise ValueError("arrival counts must be nonnegative")
        p = np.zeros(top + 1)
        for k, v in atoms.items():
            p[int(k)] = v
        return cls(p)

    @property
    def max_arrivals(self) -> int:
        return self.probs.size - 1

    def pgf(self, z):
        """A(z) evaluated at (complex) z."""
        return np.polyval(self.probs[::-1], z)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.probs.size, size=size, p=self.probs)

    def to_json(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "ArrivalPmf":
        return cls(doc["probs"])

    def __repr__(self):
        return f"ArrivalPmf(mean={self.mean:.4g}, max={self.max_arrivals})"


@dataclass(frozen=True)
class InfiniteBufferBoundary:
    """Boundary probabilities q_0..q_{S-1} of the unbounded queue."""

    boundary_probs: np.ndarray
    roots: np.ndarray
    n_one: float

    @property
    def S(self) -> int:
        return self.boundary_probs.size


@dataclass(frozen=True)
class FiniteBufferDist:
    """Stationary occupancy of the B-packet buffer and mean packets served per frame."""

    probs: np.ndarray
    served_mean: float
    S: int
    B: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "B", self.probs.size - 1)


def ergodicity_problem(arrivals: ArrivalPmf, S: int) -> str | None:
    """Reason the unbounded queue is not positive recurrent and aperiodic, or None."""
    if S < 1:
        return "service batch S must be at least 1"
    a = arrivals.probs
    if a[: min(S, a.size)].sum() <= 0:
        return "P[A <= S-1] must be positive"
    if a[: min(S + 1, a.size)].sum() >= 1.0:
        return "P[A <= S] must be below 1"
    if arrivals.mean >= S:
        return f"utilization E[A]/S = {arrivals.mean / S:.6g} must be below 1"
    return None


def _characteristic_coeffs(arrivals: ArrivalPmf, S: int) -> np.ndarray:
    """Coefficients (lowest degree first) of z^S - A(z)."""
    a = arrivals.probs
    deg = max(S, a.size - 1)
    c = np.zeros(deg + 1)
    c[: a.size] -= a
    c[S] += 1.0
    while c.size > 1 and c[-1] == 0.0:
        c = c[:-1]
    return c


def _polish(coeffs_high_first: np.ndarray, z: np.ndarray, iters: int = 8) -> np.ndarray:
    dcoeffs = np.polyder(coeffs_high_first)
    z = z.astype(complex)
    for _ in range(iters):
        f = np.polyval(coeffs_high_first, z)
        df = np.polyval(dcoeffs, z)
        ok = np.abs(df) > 1e-300
        step = np.zeros_like(z)
        step[ok] = f[ok] / df[ok]
        cand = z - step
        better = np.abs(np.polyval(coeffs_high_first, cand)) <= np.abs(f)
        z = np.where(better, cand, z)
    return z


def find_roots(arrivals: ArrivalPmf, S: int) -> np.ndarray:
    """The S-1 roots of z^S - A(z) strictly inside the unit disk.

    All roots come from the companion-matrix eigenvalues, then a few Newton
    steps tighten them. Multiple roots are repeated.
    """
    problem = ergodicity_problem(arrivals, S)
    if problem:
        raise ValueError(f"queue not ergodic: {problem}")
    if S == 1:
        return np.empty(0, dtype=complex)
    c = _characteristic_coeffs(arrivals, S)[::-1]
    roots = _polish(c, np.roots(c))
    one = int(np.argmin(np.abs(roots - 1.0)))
    if abs(roots[one] - 1.0) > 1e-6:
        raise ValueError("z = 1 not recovered as a root")
    rest = np.delete(roots, one)
    mod = np.abs(rest)
    if np.any(np.abs(mod - 1.0) <= UNIT_CIRCLE_BAND):
        raise ValueError("root on the unit circle other than z = 1 (periodic arrival PMF); perturb the PMF")
    inside = rest[mod < 1.0 - UNIT_CIRCLE_BAND]
    if inside.size != S - 1:
        raise ValueError(f"root count mismatch: found {inside.size} roots inside the unit disk, expected {S - 1}")
    resid = np.abs(np.polyval(c, inside))
    if np.any(resid > ROOT_RESIDUAL_TOL):
        raise ValueError(f"root residual {resid.max():.3g} exceeds tolerance")
    order = np.lexsort((inside.imag, inside.real))
    return inside[order]


def boundary_matrix(roots: np.ndarray, S: int) -> np.ndarray:
    """Coefficient matrix of the boundary system: rows N(z_k) = 0, last row N(1)."""
    M = np.empty((S, S), dtype=complex)
    if S > 1:
        powers = roots[:, None] ** np.arange(S)[None, :]
        # sum_{l=i}^{S-1} z^l, as a reversed cumulative sum
        M[:-1] = np.cumsum(powers[:, ::-1], axis=1)[:, ::-1]
    M[-1] = S - np.arange(S)
    return M


def solve_infinite(arrivals: ArrivalPmf, S: int) -> InfiniteBufferBoundary:
    """Boundary probabilities of the unbounded queue via the interior roots."""
    roots = find_roots(arrivals, S)
    n_one = S - arrivals.mean
    M = boundary_matrix(roots, S)
    rhs = np.zeros(S, dtype=complex)
    rhs[-1] = n_one
    if S > 1 and np.linalg.cond(M) > 1e13:
        raise ValueError("degenerate boundary system")
    try:
        q = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("degenerate boundary system") from None
    imag = np.abs(q.imag).max()
    if imag > IMAG_TOL:
        raise ValueError(f"boundary probabilities have imaginary residue {imag:.3g}")
    return InfiniteBufferBoundary(q.real.copy(), roots, float(n_one))


def build_transition_matrix(arrivals: ArrivalPmf, S: int, B: int) -> sp.csr_matrix:
    """Sparse (B+1)x(B+1) transition matrix of the finite-buffer chain.

    Row ``i`` moves to ``max(i, S) - S + A``; every arrival count that would
    reach or overflow the buffer lands in the last column.
    """
    if S < 1:
        raise ValueError("service batch S must be at least 1")
    if B <= S:
        raise ValueError("buffer must exceed service batch")
    a = arrivals.probs
    k = np.flatnonzero(a)
    states = np.arange(B + 1)
    base = np.maximum(states - S, 0)
    rows = np.repeat(states, k.size)
    cols = (base[:, None] + k[None, :]).ravel()
    vals = np.tile(a[k], B + 1)
    keep = cols < B
    P = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(B + 1, B + 1)).tocsr()
    P.sum_duplicates()
    tail = 1.0 - np.asarray(P.sum(axis=1)).ravel()
    P = P + sp.csr_matrix((np.clip(tail, 0.0, None), (states, np.full(B + 1, B))), shape=(B + 1, B + 1))
    return P.tocsr()


def closed_classes(P: sp.csr_matrix) -> list[np.ndarray]:
    """State sets of the closed communicating classes of P."""
    n_comp, labels = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaving = (labels[coo.row] != labels[coo.col]) & (coo.data > 0)
    open_comps = set(np.unique(labels[coo.row[leaving]]).tolist())
    return [np.flatnonzero(labels == c) for c in range(n_comp) if c not in open_comps]


def stationary_distribution(P: sp.spmatrix) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 for a chain with one closed class.

    The last balance equation is replaced by the normalization row. I - P^T is
    column diagonally dominant, so the LU runs in natural order without
    pivoting and fill stays inside the band; a pivoting solve covers the
    degenerate case of a zero pivot (single absorbing state).
    """
    n = P.shape[0]
    A = (sp.identity(n, format="csr") - P.T).tocsr()
    keep = sp.diags(np.r_[np.ones(n - 1), 0.0]) @ A
    norm = sp.csr_matrix((np.ones(n), (np.full(n, n - 1), np.arange(n))), shape=(n, n))
    M = (keep + norm).tocsc()
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = splu(M, permc_spec="NATURAL", diag_pivot_thresh=0.0).solve(rhs)
        ok = np.all(np.isfinite(pi))
    except RuntimeError:
        ok = False
    if not ok:
        pi = splu(M).solve(rhs)
    pi = np.where(pi < 0, 0.0, pi)
    return pi / pi.sum()


def solve_finite(arrivals: ArrivalPmf, S: int, B: int) -> FiniteBufferDist:
    """Stationary occupancy of the B-packet buffer and the mean served per frame.

    The chain starts from an empty buffer, so the law is taken over the states
    reachable from 0; those must contain exactly one closed class.
    """
    P = build_transition_matrix(arrivals, S, B)
    if arrivals.mean == 0.0:
        raise ValueError("chain not irreducible")
    reach = np.sort(breadth_first_order(P, 0, directed=True, return_predecessors=False))
    sub = P[reach][:, reach].tocsr()
    closed = closed_classes(sub)
    if len(closed) != 1:
        raise ValueError("chain not irreducible")
    q = np.zeros(B + 1)
    q[reach] = stationary_distribution(sub)
    resid = np.abs(P.T @ q - q).max()
    if resid > STEADY_STATE_TOL:
        raise ValueError(f"steady-state residual {resid:.3g} exceeds {STEADY_STATE_TOL}")
    beta = served_mean(q, S)
    q.setflags(write=False)
    return FiniteBufferDist(q, beta, S)


def served_mean(q: np.ndarray, S: int) -> float:
    i = np.arange(min(S, q.size))
    return float(S - np.dot(S - i, q[: i.size]))


def outage_probability(dist: FiniteBufferDist, S: int | None = None) -> float:
    """Probability that fewer than S packets are buffered at the start of a frame."""
    S = dist.S if S is None else S
    return float(dist.probs[:S].sum())


def drop_rate(finite: FiniteBufferDist, arrivals: ArrivalPmf) -> float:
    """Long-run fraction of arriving packets dropped because the buffer is full."""
    if arrivals.mean <= 0:
        raise ValueError("no arrivals; drop rate undefined")
    delta = 1.0 - finite.served_mean / arrivals.mean
    if delta < 0.0 or delta > 1.0:
        excess = -delta if delta < 0 else delta - 1.0
        if excess > 1e-9:
            log.warning("drop rate %.3g outside [0, 1]; clamped", delta)
        delta = min(max(delta, 0.0), 1.0)
    return delta


def drop_rate_from_boundary(finite: FiniteBufferDist, boundary: InfiniteBufferBoundary) -> float:
    """Drop rate written with the unbounded queue's boundary probabilities.

    Equals ``drop_rate`` because E[A] = S - N(1); kept as a cross-check.
    """
    S = boundary.S
    w = 1.0 - np.arange(S) / S
    qb = finite.probs[:S]
    return float(np.dot(w, qb - boundary.boundary_probs) / (1.0 - np.dot(w, boundary.boundary_probs)))


def queue_report(arrivals: ArrivalPmf, S: int, B: int, with_roots: bool = True) -> dict:
    """JSON-ready summary of the finite-buffer solve (and the root solve if it succeeds)."""
    dist = solve_finite(arrivals, S, B)
    doc = {
        "S": S,
        "B": B,
        "q": dist.probs.tolist(),
        "beta": dist.served_mean,
        "outage": outage_probability(dist, S),
        "drop_rate": drop_rate(dist, arrivals),
        "roots": [],
    }
    if with_roots:
        try:
            doc["roots"] = [[float(z.real), float(z.imag)] for z in find_roots(arrivals, S)]
        except ValueError as exc:
            doc["roots_error"] = str(exc)
    return doc
