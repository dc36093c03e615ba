"""Signal-quality traces, MCS mapping and per-block rate distributions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

PROB_TOL = 1e-9


@dataclass(frozen=True)
class McsTable:
    """SINR thresholds (dB) and the per-block rate (bits/s) of each level.

    Level ``j`` is selected when ``thresholds[j] <= sinr < thresholds[j+1]``.
    """

    thresholds: tuple
    rates: tuple

    def __post_init__(self):
        th = tuple(float(x) for x in self.thresholds)
        rt = tuple(float(x) for x in self.rates)
        if len(th) == 0 or len(th) != len(rt):
            raise ValueError("thresholds and rates must be non-empty and of equal length")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if any(b <= a for a, b in zip(rt, rt[1:])):
            raise ValueError("rates must be strictly increasing")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "rates", rt)

    @property
    def m(self) -> int:
        return len(self.rates)

    def to_json(self) -> dict:
        return {"thresholds_db": list(self.thresholds), "rates_bps": list(self.rates)}

    @classmethod
    def from_json(cls, doc: dict) -> "McsTable":
        return cls(tuple(doc["thresholds_db"]), tuple(doc["rates_bps"]))


@dataclass(frozen=True)
class RatePmf:
    """Distribution of a user's per-block rate over the rates it can take."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        sup = tuple(float(x) for x in self.support)
        pr = tuple(float(x) for x in self.probs)
        if len(sup) == 0 or len(sup) != len(pr):
            raise ValueError("support and probs must be non-empty and of equal length")
        if any(b <= a for a, b in zip(sup, sup[1:])):
            raise ValueError("support must be strictly increasing")
        if any(p < 0 for p in pr):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(pr) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(pr)!r}, not 1")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", pr)

    def as_arrays(self):
        return np.asarray(self.support), np.asarray(self.probs)

    def to_json(self) -> dict:
        return {"support_bps": list(self.support), "probs": list(self.probs)}

    @classmethod
    def from_json(cls, doc: dict) -> "RatePmf":
        return cls(tuple(doc["support_bps"]), tuple(doc["probs"]))

    @classmethod
    def from_samples(cls, rates: Iterable[float]) -> "RatePmf":
        values, counts = np.unique(np.asarray(list(rates), dtype=float), return_counts=True)
        if values.size == 0:
            raise ValueError("no samples")
        return cls(tuple(values), tuple(counts / counts.sum()))


@dataclass(frozen=True)
class TraceRecord:
    timestamp_ms: float
    user_id: str
    rssi_dbm: float | None = None
    sinr_db: float | None = None


class SinrMapping:
    """Piecewise-linear RSSI (dBm) to SINR (dB) map, extrapolated linearly past the anchors."""

    def __init__(self, rssi_dbm: Sequence[float], sinr_db: Sequence[float]):
        x = np.asarray(rssi_dbm, dtype=float)
        y = np.asarray(sinr_db, dtype=float)
        if x.size < 2 or x.size != y.size:
            raise ValueError("need at least two (rssi, sinr) anchor points")
        if np.any(np.diff(x) <= 0):
            raise ValueError("rssi anchors must be strictly increasing")
        self.rssi_dbm = x
        self.sinr_db = y

    def __call__(self, rssi):
        x, y = self.rssi_dbm, self.sinr_db
        r = np.asarray(rssi, dtype=float)
        out = np.interp(r, x, y)
        lo, hi = r < x[0], r > x[-1]
        out = np.where(lo, y[0] + (r - x[0]) * (y[1] - y[0]) / (x[1] - x[0]), out)
        out = np.where(hi, y[-1] + (r - x[-1]) * (y[-1] - y[-2]) / (x[-1] - x[-2]), out)
        return out if out.ndim else float(out)

    def to_json(self) -> dict:
        return {"rssi_dbm": self.rssi_dbm.tolist(), "sinr_db": self.sinr_db.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "SinrMapping":
        return cls(doc["rssi_dbm"], doc["sinr_db"])


# Default anchors: the MCS thresholds as SINR values, placed on a -95 dBm reference.
DEFAULT_RSSI_OFFSET_DB = -95.0


def default_mapping(table: McsTable) -> SinrMapping:
    sinr = np.asarray(table.thresholds)
    if sinr.size < 2:
        sinr = np.array([sinr[0] - 1.0, sinr[0]])
    return SinrMapping(sinr + DEFAULT_RSSI_OFFSET_DB, sinr)


def map_sinr_to_rate(sinr, table: McsTable):
    """Per-block rate for an SINR (dB): ``r_j`` for ``gamma_j <= sinr < gamma_{j+1}``.

    SINR below the first threshold gives 0. Accepts scalars or arrays.
    """
    th = np.asarray(table.thresholds)
    rates = np.concatenate(([0.0], np.asarray(table.rates)))
    idx = np.searchsorted(th, np.asarray(sinr, dtype=float), side="right")
    out = rates[idx]
    return out if np.ndim(out) else float(out)


def record_sinr(records: Sequence[TraceRecord], rssi_to_sinr: Callable | None) -> np.ndarray:
    sinr = np.empty(len(records))
    for k, rec in enumerate(records):
        if rec.sinr_db is not None:
            sinr[k] = rec.sinr_db
        elif rec.rssi_dbm is not None:
            if rssi_to_sinr is None:
                raise ValueError("record carries RSSI but no RSSI->SINR mapping was given")
            sinr[k] = rssi_to_sinr(rec.rssi_dbm)
        else:
            raise ValueError(f"record {k} has neither rssi nor sinr")
    return sinr


def estimate_pmf(trace: Sequence[TraceRecord], table: McsTable, rssi_to_sinr: Callable | None = None) -> RatePmf:
    """Empirical per-block rate PMF of one user's trace (ordering is discarded)."""
    if len(trace) == 0:
        raise ValueError("no samples")
    if rssi_to_sinr is None:
        rssi_to_sinr = default_mapping(table)
    rates = map_sinr_to_rate(record_sinr(trace, rssi_to_sinr), table)
    return RatePmf.from_samples(np.atleast_1d(rates))


def mean_rate(pmf: RatePmf) -> float:
    s, p = pmf.as_arrays()
    return float(np.dot(s, p))


def rate_cv(pmf: RatePmf) -> float:
    """Coefficient of variation of the per-block rate."""
    s, p = pmf.as_arrays()
    mu = np.dot(s, p)
    return float(np.sqrt(np.dot(p, (s - mu) ** 2)) / mu)


# --- file formats -----------------------------------------------------------


def read_trace_csv(path) -> dict[str, list[TraceRecord]]:
    """Read a ``timestamp_ms,user_id,rssi_dbm|sinr_db`` CSV into per-user record lists.

    Raises ``ValueError`` naming the offending row on malformed input.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "timestamp_ms" not in fields or "user_id" not in fields:
            raise ValueError(f"{path}: header must contain timestamp_ms and user_id")
        col = "sinr_db" if "sinr_db" in fields else "rssi_dbm" if "rssi_dbm" in fields else None
        if col is None:
            raise ValueError(f"{path}: header must contain rssi_dbm or sinr_db")
        users: dict[str, list[TraceRecord]] = {}
        for row_no, row in enumerate(reader, start=2):
            try:
                ts = float(row["timestamp_ms"])
                uid = row["user_id"].strip()
                val = float(row[col])
            except (TypeError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}: malformed row {row_no}: {exc}") from None
            if not uid:
                raise ValueError(f"{path}: malformed row {row_no}: empty user_id")
            recs = users.setdefault(uid, [])
            if recs and ts < recs[-1].timestamp_ms:
                raise ValueError(f"{path}: row {row_no}: timestamps decrease for user {uid}")
            if col == "sinr_db":
                recs.append(TraceRecord(ts, uid, sinr_db=val))
            else:
                recs.append(TraceRecord(ts, uid, rssi_dbm=val))
    if not users:
        raise ValueError(f"{path}: no samples")
    return users


def write_trace_csv(path, records: Iterable[TraceRecord], column: str = "rssi_dbm") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_ms", "user_id", column])
        for r in records:
            w.writerow([r.timestamp_ms, r.user_id, getattr(r, column)])


def load_mcs_table(path) -> McsTable:
    return McsTable.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def load_mapping(path) -> SinrMapping:
    return SinrMapping.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
