"""Command-line front end.

Subcommands: ``ingest``, ``analyze``, ``allocate``, ``simulate``, ``compare``.
Every command reads one JSON scenario document (see docs/formats.md), writes
its results under ``--out`` and prints a summary table on standard output.
Progress goes to standard error. On failure a JSON error object is printed
on standard output and the exit code is non-zero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from liveplayout import channel, data
from liveplayout.allocation import (
    CellConfig,
    TwoClassConfig,
    admission_control,
    baseline_user_counts,
    equal_experience_arrivals,
    max_users_max_resolution,
    static_share_arrivals,
    two_class_split,
)
from liveplayout.channel import RatePmf, mean_rate, rate_cv
from liveplayout.playout import (
    ConstraintsUnsatisfiable,
    FrameParams,
    QoeConstraints,
    max_playout_rate,
)
from liveplayout.sim import AbrParams, sim_max_playout, simulate_abr, simulate_constant, trace_playback_arrivals

log = logging.getLogger("liveplayout")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class CliError(Exception):
    def __init__(self, kind: str, message: str, **detail):
        super().__init__(message)
        self.kind = kind
        self.detail = detail


# --- scenario -----------------------------------------------------------------


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


@dataclass
class Scenario:
    K: float
    frame: FrameParams
    B: int
    users: dict  # id -> RatePmf
    epsilon: list
    delta0: list
    share: float | None = None
    traces: dict | None = None  # id -> per-frame rates (bits/s), trace-playback mode
    allocate: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def user_share(self) -> float:
        return self.share if self.share is not None else 1.0 / len(self.users)

    def constraints(self):
        return [QoeConstraints(e, d) for d in self.delta0 for e in self.epsilon]

    def cell(self, ids=None) -> CellConfig:
        ids = list(self.users) if ids is None else ids
        return CellConfig(tuple((u, self.users[u]) for u in ids), self.K, self.frame, self.B)

    def static_arrivals(self, uid):
        return static_share_arrivals(self.users[uid], self.K, self.user_share, self.frame)


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _load_users(doc, base: Path) -> dict:
    spec = doc.get("users")
    if spec is None:
        raise CliError("scenario", "scenario has no users")
    if spec == "amsterdam":
        return {str(u): p for u, p in data.amsterdam_users().items()}
    users = {}
    for k, entry in enumerate(_as_list(spec)):
        if "id" not in entry:
            raise CliError("scenario", f"user entry {k} has no id")
        uid = str(entry["id"])
        if "pmf" in entry:
            users[uid] = RatePmf.from_json(entry["pmf"])
        elif "pmf_file" in entry:
            path = _resolve(base, entry["pmf_file"])
            users[uid] = RatePmf.from_json(_read_json(path))
        elif "amsterdam" in entry:
            users[uid] = data.amsterdam_pmf(int(entry["amsterdam"]))
        else:
            raise CliError("scenario", f"user {uid} needs pmf, pmf_file or amsterdam")
    if len(users) != len(_as_list(spec)):
        raise CliError("scenario", "duplicate user ids")
    return users


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("io", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError("format", f"{path}: invalid JSON ({exc})") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    doc = _read_json(path)
    base = path.parent
    try:
        frame = FrameParams(doc.get("frame_ms", 10.0) / 1000.0, float(doc.get("packet_bits", data.PACKET_BITS)))
        traces = None
        if "trace" in doc:
            t = doc["trace"]
            table = channel.load_mcs_table(_resolve(base, t["mcs"])) if "mcs" in t else data.mcs_table()
            mapping = channel.load_mapping(_resolve(base, t["mapping"])) if "mapping" in t else channel.default_mapping(table)
            recs = channel.read_trace_csv(_resolve(base, t["csv"]))
            users = {u: channel.estimate_pmf(r, table, mapping) for u, r in recs.items()}
            traces = {u: np.atleast_1d(channel.map_sinr_to_rate(channel.record_sinr(r, mapping), table))
                      for u, r in recs.items()}
        else:
            users = _load_users(doc, base)
        sc = Scenario(
            K=float(doc.get("K", data.K_BLOCKS)),
            frame=frame,
            B=int(doc.get("buffer_packets", data.BUFFER_PACKETS)),
            users=users,
            epsilon=_as_list(doc.get("epsilon", 0.01)),
            delta0=_as_list(doc.get("delta0", 0.03)),
            share=doc.get("share"),
            traces=traces,
            allocate=doc.get("allocate", {}),
            simulate=doc.get("simulate", {}),
            base_dir=base,
        )
        sc.constraints()  # validates the ranges
    except CliError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("scenario", f"{path}: {exc}") from None
    if sc.B < 2:
        raise CliError("scenario", "buffer_packets must be at least 2")
    return sc


# --- output -------------------------------------------------------------------


def _report(kind: str, keys: list, rows: list, meta: dict | None = None) -> dict:
    return {"kind": kind, "keys": keys, "rows": rows, "meta": meta or {}}


def _rows_csv(rows: list) -> str:
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _emit(report: dict, out: Path | None, stem: str, fmt: str) -> None:
    text_json = json.dumps(report, indent=2, sort_keys=True) + "\n"
    text_csv = _rows_csv(report["rows"])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(text_json, encoding="utf-8")
        (out / f"{stem}.csv").write_text(text_csv, encoding="utf-8")
        log.info("wrote %s/%s.{json,csv}", out, stem)
    sys.stdout.write(text_json if fmt == "json" else text_csv)


# --- commands -----------------------------------------------------------------


def cmd_ingest(args) -> None:
    table = channel.load_mcs_table(args.mcs) if args.mcs else data.mcs_table()
    mapping = channel.load_mapping(args.mapping) if args.mapping else channel.default_mapping(table)
    try:
        recs = channel.read_trace_csv(args.trace)
    except FileNotFoundError:
        raise CliError("io", f"file not found: {args.trace}") from None
    out = Path(args.out) if args.out else None
    rows = []
    for uid in sorted(recs):
        pmf = channel.estimate_pmf(recs[uid], table, mapping)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"pmf_{uid}.json").write_text(json.dumps(pmf.to_json(), indent=2) + "\n", encoding="utf-8")
        rows.append({"user": uid, "samples": len(recs[uid]), "mean_rate_bps": mean_rate(pmf), "cv": rate_cv(pmf)})
        log.info("user %s: %d samples", uid, len(recs[uid]))
    _emit(_report("ingest", ["user"], rows), out, "ingest", args.format)


def _solve_user(sc: Scenario, uid, c: QoeConstraints, arrivals=None) -> dict:
    arrivals = arrivals if arrivals is not None else sc.static_arrivals(uid)
    row = {"user": uid, "epsilon": c.epsilon, "delta0": c.delta0}
    try:
        sol = max_playout_rate(arrivals, sc.B, sc.frame, c)
        row.update(S=sol.S, U_bps=sol.U, outage=sol.achieved_outage, drop=sol.achieved_drop, feasible=True)
    except ConstraintsUnsatisfiable as exc:
        S, o, d = exc.best
        row.update(S=S, U_bps=sc.frame.rate_of(S), outage=o, drop=d, feasible=False)
    return row


def cmd_analyze(args) -> None:
    sc = load_scenario(args.scenario)
    rows = []
    for uid in sc.users:
        arr = sc.static_arrivals(uid)
        for c in sc.constraints():
            log.info("analyze user %s eps=%g delta0=%g", uid, c.epsilon, c.delta0)
            rows.append(_solve_user(sc, uid, c, arr))
    meta = {"share": sc.user_share, "K": sc.K, "B": sc.B}
    _emit(_report("playout", ["user", "epsilon", "delta0"], rows, meta), _out(args), "analyze", args.format)


def cmd_allocate(args) -> None:
    sc = load_scenario(args.scenario)
    a = sc.allocate
    objective = args.objective
    rows, meta = [], {"objective": objective}
    if objective == "equal":
        ids = [str(u) for u in a.get("users", list(sc.users))]
        arr = equal_experience_arrivals(sc.cell(ids))
        for c in sc.constraints():
            row = _solve_user(sc, "all", c, arr)
            row["n_users"] = len(ids)
            rows.append(row)
        meta["plan"] = {"kind": "dynamic-inverse"}
    elif objective == "max-users":
        U_min, U_max = float(a["U_min_bps"]), float(a["U_max_bps"])
        c = sc.constraints()[0]
        cell = sc.cell()
        admitted, _, _ = admission_control(cell, U_min, c.delta0)
        cell = sc.cell([u for u in sc.users if u in admitted])  # scenario order keeps sampling stable
        N, selected, plan = max_users_max_resolution(cell, U_min, U_max, c.delta0)
        rows.append({"policy": "max_users", "users_at_U_max": N})
        if a.get("baselines", True):
            log.info("evaluating baseline policies")
            counts = baseline_user_counts(cell, U_max, c, samples=int(a.get("samples", 200_000)), seed=args.seed)
            rows += [{"policy": k, "users_at_U_max": v} for k, v in counts.items()]
        meta.update(admitted=admitted, selected=selected, plan=plan.to_json())
    elif objective == "two-class":
        prem = [str(u) for u in a["premium"]]
        reg = [u for u in sc.users if u not in prem]
        for k_p in _as_list(a.get("k_p", 1.0)):
            cfg = TwoClassConfig(tuple(sc.users[u] for u in prem), tuple(sc.users[u] for u in reg), float(k_p),
                                 a.get("delta_p", 0.01), a.get("delta_r", 0.01),
                                 a.get("epsilon_p", 0.1), a.get("epsilon_r", 0.1))
            split = two_class_split(cfg, sc.K)
            rows.append({"k_p": k_p, **split.to_json()})
        meta.update(premium=prem, regular=reg)
    else:  # argparse restricts choices
        raise CliError("usage", f"unknown objective {objective}")
    _emit(_report(f"allocate-{objective}", list(rows[0])[:1], rows, meta), _out(args), f"allocate_{objective}",
          args.format)


def _abr_scenarios(sim: dict) -> list:
    default = [{"name": "sc1", "low": 0.25, "high": 0.75, "theta": 0.10},
               {"name": "sc2", "low": 0.30, "high": 0.80, "theta": 0.05},
               {"name": "sc3", "low": 0.35, "high": 0.85, "theta": 0.20}]
    return sim.get("abr", default)


def _sim_source(sc: Scenario, uid, frames):
    if sc.traces is not None:
        return trace_playback_arrivals(sc.traces[uid], None, sc.user_share, sc.frame, sc.K, frames=frames)
    return sc.static_arrivals(uid)


def cmd_simulate(args) -> None:
    sc = load_scenario(args.scenario)
    sim = sc.simulate
    frames = int(sim.get("frames", data.EVENT_FRAMES))
    eta = float(sim.get("eta", 0.05))
    policy = sim.get("policy", "both")
    runs, seed = args.runs, args.seed
    out = _out(args)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    c = sc.constraints()[0]
    rows = []
    if policy == "search":
        for uid in sc.users:
            src = _sim_source(sc, uid, frames)
            for cc in sc.constraints():
                log.info("simulated search user %s eps=%g delta0=%g", uid, cc.epsilon, cc.delta0)
                S, rep = sim_max_playout(src, sc.B, cc, frames, seed, sc.frame, runs=runs)
                row = {"user": uid, "epsilon": cc.epsilon, "delta0": cc.delta0, "S": S,
                       "U_bps": sc.frame.rate_of(S) if S else None,
                       "outage": rep.empirical_outage if rep else None,
                       "drop": rep.empirical_drop if rep else None, "feasible": S is not None}
                rows.append(row)
        _emit(_report("playout", ["user", "epsilon", "delta0"], rows, {"frames": frames, "seed": seed}),
              out, "simulate", args.format)
        return

    u_init = sim.get("u_init_bps")
    if u_init is None and policy in ("abr", "both"):
        try:
            u_init = max_playout_rate(equal_experience_arrivals(sc.cell()), sc.B, sc.frame, c).U
        except ConstraintsUnsatisfiable as exc:
            u_init = sc.frame.rate_of(exc.best[0])
    for uid in sc.users:
        src = _sim_source(sc, uid, frames)
        if policy in ("constant", "both"):
            base = _solve_user(sc, uid, c)
            S = int(sim.get("S", base["S"]))
            log.info("constant policy user %s S=%d", uid, S)
            dump = out / f"frames_{uid}_constant.csv" if (args.frames_csv and out) else None
            rep = simulate_constant(src, S, sc.B, frames, seed, runs, sc.frame, eta, dump)
            rows.append({"user": uid, "policy": "constant", "U_bps": sc.frame.rate_of(S),
                         "outage": rep.empirical_outage, "drop": rep.empirical_drop,
                         "mean_playout_bps": rep.mean_playout, "playout_variance": rep.playout_variance,
                         "qoe": rep.qoe, "target_met": base["feasible"]})
        if policy in ("abr", "both"):
            for ab in _abr_scenarios(sim):
                params = AbrParams.scenario(sc.B, ab["low"], ab["high"], ab["theta"], float(ab.get("u_init_bps", u_init)))
                log.info("abr %s user %s", ab["name"], uid)
                dump = out / f"frames_{uid}_{ab['name']}.csv" if (args.frames_csv and out) else None
                rep = simulate_abr(src, params, sc.B, frames, seed, runs, sc.frame, eta, dump_path=dump)
                rows.append({"user": uid, "policy": ab["name"], "U_bps": None,
                             "outage": rep.empirical_outage, "drop": rep.empirical_drop,
                             "mean_playout_bps": rep.mean_playout, "playout_variance": rep.playout_variance,
                             "qoe": rep.qoe, "target_met": None})
    meta = {"frames": frames, "runs": runs, "seed": seed, "eta": eta, "u_init_bps": u_init,
            "mode": "trace-playback" if sc.traces is not None else "iid"}
    _emit(_report("simulation", ["user", "policy"], rows, meta), out, "simulate", args.format)


def cmd_compare(args) -> None:
    reports = [_read_json(Path(p)) for p in args.reports]
    if len(reports) < 2:
        raise CliError("usage", "compare needs at least two reports")
    first = reports[0]
    for p, r in zip(args.reports[1:], reports[1:]):
        if r.get("kind") != first.get("kind") or r.get("keys") != first.get("keys"):
            raise CliError("schema", f"{p}: report kind/keys differ from {args.reports[0]}")
    keys = first["keys"]
    index = [{tuple(str(row.get(k)) for k in keys): row for row in r["rows"]} for r in reports]
    common = [k for k in index[0] if all(k in ix for ix in index[1:])]
    value_cols = [c for c in first["rows"][0] if c not in keys] if first["rows"] else []
    rows = []
    for key in common:
        row = dict(zip(keys, key))
        ref = index[0][key]
        for c in value_cols:
            row[f"{c}_0"] = ref.get(c)
            for j in range(1, len(reports)):
                v = index[j][key].get(c)
                row[f"{c}_{j}"] = v
                if isinstance(v, (int, float)) and isinstance(ref.get(c), (int, float)) \
                        and not isinstance(v, bool) and not isinstance(ref.get(c), bool):
                    row[f"{c}_delta_{j}"] = v - ref[c]
                    row[f"{c}_rel_{j}"] = (v - ref[c]) / ref[c] if ref[c] else 0.0
        rows.append(row)
    meta = {"inputs": [str(p) for p in args.reports], "unmatched": sum(len(ix) for ix in index) - len(common) * len(index)}
    _emit(_report("compare", keys, rows, meta), _out(args), "compare", args.format)


def _out(args):
    return Path(args.out) if args.out else None


# --- entry point --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json", help="standard output format")
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")

    p = _Parser(prog="liveplayout", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="trace CSV -> per-user rate PMFs")
    s.add_argument("--trace", required=True)
    s.add_argument("--mcs")
    s.add_argument("--mapping")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("analyze", parents=[common], help="maximum playout rate per user")
    s.add_argument("--scenario", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("allocate", parents=[common], help="frame-ratio allocation")
    s.add_argument("--scenario", required=True)
    s.add_argument("--objective", choices=("equal", "max-users", "two-class"), required=True)
    s.set_defaults(func=cmd_allocate)

    s = sub.add_parser("simulate", parents=[common], help="frame-level simulation")
    s.add_argument("--scenario", required=True)
    s.add_argument("--frames-csv", action="store_true", help="also dump per-frame CSV files (large)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", parents=[common], help="side-by-side report comparison")
    s.add_argument("reports", nargs="+")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s", stream=sys.stderr)
        if args.runs < 1:
            raise CliError("usage", "--runs must be at least 1")
        args.func(args)
        return EXIT_OK
    except CliError as exc:
        err = {"type": exc.kind, "message": str(exc), **exc.detail}
        code = EXIT_USAGE if exc.kind == "usage" else EXIT_FAIL
    except (ValueError, KeyError, OSError) as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        code = EXIT_FAIL
    sys.stdout.write(json.dumps({"error": err}, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
