"""Declarative scenarios: JSON config in, metrics rows, trace and verdicts out."""

from __future__ import annotations

import copy
import math
import statistics
from dataclasses import dataclass, field
from typing import Any

from .. import elections_classical as ec
from ..election_quantum import (
    FULL,
    WINDOW,
    QuantumElection,
    QuantumParams,
    bootstrap,
    fallback_window,
)
from ..errors import (
    BootstrapFailed,
    ConfigError,
    ElectionLabError,
    ModelMismatch,
    TopologyMismatch,
    UnsoundTimeout,
)
from ..simnet import (
    CLASSICAL,
    QUANTUM,
    Asynchronous,
    Envelope,
    FaultPlan,
    MessageFilter,
    PartiallySynchronous,
    Synchronous,
    jsonable,
)
from ..topology import build_clique, build_ring, from_edges
from .defaults import DEFAULTS
from .io import RUN_COLUMNS, render_csv, render_jsonl
from .schema import PARAMS_SCHEMA, SCENARIO_SCHEMA, validate

DEFAULT_LIMIT = 10**6


@dataclass
class Verdict:
    """A named claim check; ``passed`` is None when the check is inconclusive."""

    name: str
    measured: Any
    bound: Any
    passed: bool | None
    note: str = ""

    def to_json(self):
        return {"name": self.name, "measured": jsonable(self.measured),
                "bound": jsonable(self.bound), "passed": self.passed, "note": self.note}

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]
        text = f"{status} {self.name}: measured={_short(self.measured)} bound={_short(self.bound)}"
        return f"{text} ({self.note})" if self.note else text


def _short(value) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, (list, tuple)) and len(value) > 8:
        return f"[{len(value)} values, min={min(value)}, max={max(value)}]"
    return str(value)


@dataclass
class RunReport:
    name: str
    protocol: str
    rows: list
    verdicts: list
    aggregates: dict
    trace: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts)

    def csv(self) -> str:
        return render_csv(self.rows, RUN_COLUMNS)

    def jsonl(self) -> str:
        return render_jsonl(self.trace)

    def to_json(self):
        return {"name": self.name, "protocol": self.protocol, "aggregates": self.aggregates,
                "verdicts": [v.to_json() for v in self.verdicts]}


# --- building blocks ------------------------------------------------------------


def build_topology(spec: dict, seed: int, where: str = "/topology"):
    kind, n = spec["kind"], spec["n"]
    try:
        if kind == "ring":
            return build_ring(n, spec.get("direction", "uni"), spec.get("id_order", "sorted"),
                              seed=spec.get("id_seed", seed), anonymous=spec.get("anonymous", False))
        if kind == "clique":
            return build_clique(n)
        return from_edges(n, [tuple(e) for e in spec.get("edges", [])], spec.get("direction", "bi"))
    except ElectionLabError as exc:
        raise ConfigError(str(exc), where) from None


def build_delay(spec: dict | None, protocol: str = "quantum"):
    if spec is None:
        bound = 1 if protocol == "itai-rodeh" else DEFAULTS["nominal_bound"]
        return Synchronous(bound)
    model = spec["model"]
    try:
        if model == "synchronous":
            return Synchronous(spec.get("bound", 1), spec.get("fixed", False))
        if model == "partial":
            return PartiallySynchronous(spec.get("gst", 0), spec.get("bound", 1),
                                        spec.get("pre_gst_max", 10))
        stall = spec.get("stall")
        return Asynchronous(spec.get("spread", 5), spec.get("distribution", "uniform"),
                            MessageFilter.from_json(stall) if stall is not None else None)
    except ValueError as exc:
        raise ConfigError(str(exc), "/delay") from None


def build_faults(spec: dict | None, n: int) -> FaultPlan | None:
    if not spec:
        return None
    for i, (node, _) in enumerate(spec.get("crashes", [])):
        if node >= n:
            raise ConfigError(f"node {node} does not exist", f"/faults/crashes/{i}/0")
    try:
        return FaultPlan(spec.get("crashes", []),
                         [MessageFilter.from_json(o) for o in spec.get("omissions", [])],
                         spec.get("f_max"))
    except ValueError as exc:
        raise ConfigError(str(exc), "/faults/f_max") from None


def seed_list(config: dict) -> list:
    seeds = config.get("seeds")
    if seeds is None:
        return [config.get("seed", 0)]
    if isinstance(seeds, dict):
        start = seeds.get("start", 0)
        return list(range(start, start + seeds["count"]))
    return list(seeds)


def _lift_params(config: dict) -> dict:
    """Move top-level protocol knobs under ``params``, remembering where each came from."""
    params = config.setdefault("params", {})
    flat = set()
    for key in PARAMS_SCHEMA["properties"]:
        if key in config:
            if key in params:
                raise ConfigError(f"{key!r} given both at top level and under params", f"/{key}")
            params[key] = config.pop(key)
            flat.add(key)
    config["_flat"] = flat
    return config


def ppath(config: dict, key: str) -> str:
    """JSON pointer of protocol knob ``key`` in the file as written."""
    return f"/{key}" if key in config.get("_flat", ()) else f"/params/{key}"


def _initiators(config: dict, n: int, default):
    value = config["params"].get("initiators", default)
    if value == "all" or value is None:
        return None
    for i, v in enumerate(value):
        if v >= n:
            raise ConfigError(f"node {v} does not exist", f"{ppath(config, 'initiators')}/{i}")
    return value


def _record(item) -> dict:
    return item.to_json() if isinstance(item, Envelope) else jsonable(item)


# --- per-protocol runners -------------------------------------------------------


def _run_classical(config, seed, limit, want_trace):
    protocol = config["protocol"]
    params = config.get("params", {})
    topo = build_topology(config["topology"], seed)
    n = topo.node_count
    delay = build_delay(config.get("delay"), protocol)
    faults = config.get("faults")
    if faults and protocol != "bully" and (faults.get("crashes") or faults.get("omissions")):
        raise ConfigError(f"{protocol} runs without crash or omission faults", "/faults")
    try:
        if protocol == "chang-roberts":
            res = ec.run_chang_roberts(topo, delay, seed, _initiators(config, n, "all"), limit)
        elif protocol == "dkr":
            res = ec.run_dkr(topo, delay, seed, limit)
        elif protocol == "hirschberg-sinclair":
            res = ec.run_hirschberg_sinclair(topo, delay, seed, _initiators(config, n, "all"), limit)
        elif protocol == "itai-rodeh":
            res = ec.run_itai_rodeh(topo, params.get("n_known", n), delay, seed,
                                    _initiators(config, n, "all"), limit)
        else:
            res = ec.run_bully(topo, _initiators(config, n, [0]) or list(topo.nodes),
                               build_faults(faults, n), delay, params.get("timeout"), seed, limit)
    except TopologyMismatch as exc:
        raise ConfigError(str(exc), "/topology") from None
    except ModelMismatch as exc:
        where = ppath(config, "n_known") if "known size" in str(exc) else "/delay"
        raise ConfigError(str(exc), where) from None
    except UnsoundTimeout as exc:
        raise ConfigError(str(exc), ppath(config, "timeout")) from None
    net, m = res.network, res.metrics
    agreement = res.agreement
    if protocol == "itai-rodeh":
        agreement = agreement and len(res.winners) == 1
    row = {
        "round": 0,
        "leader": res.leader,
        "leader_alive": None if res.leader is None else net.alive(res.leader),
        "agreement": agreement,
        "terminated": m.terminated,
        "messages": m.total_sent,
        "election_messages": res.election_messages,
        "total_messages": m.total_sent,
        "classical_messages": m.messages_sent[CLASSICAL],
        "quantum_messages": m.messages_sent[QUANTUM],
        "causal_time": m.time_complexity,
        "events": m.wall_steps,
        "phases": res.phases,
    }
    records = []
    if want_trace:
        records = [_record(x) for x in net.log]
        records.append({"type": "row", "round": 0})
    return [row], records


def adversary_crashes(b: int, f: int, n: int, count: int, alive) -> list:
    """Crash the measured winner first, then the highest window members,
    then the highest remaining nodes."""
    window = fallback_window(b, f, n)
    order = ([b] if b < n else []) + sorted((w for w in window if w != b), reverse=True)
    order += sorted((v for v in alive if v not in order), reverse=True)
    return [v for v in order if v in alive][:count]


class _SnapTracker:
    """Running count of GHZ states whose coherent digits disagree."""

    def __init__(self, registry):
        self.registry = registry
        self.pos = 0
        self.digit = {}
        self.bad = set()

    def update(self) -> int:
        ms = self.registry.measurements
        for m in ms[self.pos:]:
            if not m.decohered and self.digit.setdefault(m.state_id, m.digit) != m.digit:
                self.bad.add(m.state_id)
        self.pos = len(ms)
        return len(self.bad)


def _run_quantum(config, seed, limit, want_trace):
    params = config.get("params", {})
    topo = build_topology(config["topology"], seed)
    n = topo.node_count
    if n < 2:
        raise ConfigError("the quantum election needs at least 2 nodes", "/topology/n")
    f = params.get("f", 0)
    if f >= n:
        raise ConfigError(f"f={f} must be below n={n}", ppath(config, "f"))
    crash_count = params.get("crash_count", f)
    if crash_count >= n:
        raise ConfigError(f"crash_count={crash_count} must be below n={n}", ppath(config, "crash_count"))
    delay = build_delay(config.get("delay"))
    ttl = params.get("ttl")
    qp = QuantumParams(n=n, d=params.get("d", 2), f=f,
                       ttl=math.inf if ttl is None else ttl,
                       heartbeat=params.get("heartbeat"), bound=delay.nominal_bound,
                       window_always=params.get("window_always", False))
    default_boot = "bully" if topo.kind == "clique" else (
        "hirschberg-sinclair" if topo.direction == "bi" else "chang-roberts")
    boot_protocol = params.get("bootstrap", default_boot)
    header = {"type": "bootstrap", "protocol": boot_protocol}
    try:
        epoch0, boot = bootstrap(topo, delay, seed, boot_protocol, limit)
    except TopologyMismatch as exc:
        raise ConfigError(str(exc), ppath(config, "bootstrap")) from None
    except BootstrapFailed as exc:
        header.update(leader=None, error=str(exc))
        row = {"round": -1, "terminated": False, "agreement": False, "path": "bootstrap-failed"}
        return [row], [header, {"type": "row", "round": -1}] if want_trace else []
    header.update(leader=epoch0.leader_of_record, messages=boot.messages,
                  causal_time=boot.metrics.time_complexity)
    record_events = params.get("record_events", True)
    q = QuantumElection(qp, delay, seed, bootstrap_leader=epoch0.leader_of_record,
                        faults=build_faults(config.get("faults"), n), record_events=record_events)
    q.start(limit)
    rows, marks = [], []
    snap = _SnapTracker(q.registry)
    for i in range(params.get("rounds", 1)):
        crashes = []
        if i == 0 and params.get("adversary", "none") == "crash-winner" and crash_count:
            alive = [v for v in q.net.alive_nodes() if q.net.alive(v, q.net.now + 1)]
            crashes = adversary_crashes(q.predicted_b(), f, n, crash_count, alive)
        start = len(q.net.log)
        rep = q.election_round(crashes=crashes, limit=limit)
        segment = q.net.log[start:]
        envs = [x for x in segment if isinstance(x, Envelope)]
        scopes = {r["scope"] for r in segment if isinstance(r, dict) and r["type"] == "fallback"}
        path = "full-bully" if FULL in scopes else ("window-bully" if WINDOW in scopes else "direct")
        rows.append({
            "round": rep.round,
            "initiator": rep.initiator,
            "b": rep.b,
            "crashed": rep.crashed,
            "leader": rep.leader,
            "leader_alive": None if rep.leader is None else q.net.alive(rep.leader),
            "agreement": rep.terminated and rep.leader is not None,
            "terminated": rep.terminated,
            "messages": rep.messages,
            "total_messages": len(envs),
            "classical_messages": sum(1 for x in envs if x.channel == CLASSICAL),
            "quantum_messages": sum(1 for x in envs if x.channel == QUANTUM),
            "causal_time": rep.causal_time,
            "events": rep.events,
            "leader_changes": rep.leader_changes,
            "path": path,
            "snap_violations": snap.update(),
        })
        marks.append((start, len(q.net.log), rep.round))
        if not rep.terminated:
            break
    records = []
    if want_trace:
        records.append(header)
        pos = 0
        for begin, end, rnd in marks:
            records.extend(_record(x) for x in q.net.log[pos:begin])
            records.append({"type": "round-begin", "round": rnd})
            records.extend(_record(x) for x in q.net.log[begin:end])
            records.append({"type": "row", "round": rnd})
            pos = end
    return rows, records


# --- verdicts ---------------------------------------------------------------------

_EQUALITY = ("leader", "messages", "causal_time", "terminated", "agreement",
             "leader_alive", "leader_changes", "snap_violations")


def _expectations(config) -> dict:
    expect = dict(config.get("expect", {}))
    if expect.get("terminated", True):
        expect.setdefault("terminated", True)
        expect.setdefault("agreement", True)
    return expect


def scenario_verdicts(rows, expect) -> list:
    out = []
    for key, bound in expect.items():
        if key == "max_messages":
            values = [r.get("messages") for r in rows]
            ok = all(v is not None and v <= bound for v in values)
            out.append(Verdict("max_messages", max(values, default=None), bound, ok and bool(rows)))
            continue
        values = [r.get(key) for r in rows]
        seen = sorted({v for v in values}, key=repr)
        measured = seen[0] if len(seen) == 1 else seen
        out.append(Verdict(key, measured, bound, bool(rows) and all(v == bound for v in values)))
    return out


def aggregates(rows) -> dict:
    def stats(key):
        vals = [r[key] for r in rows if r.get(key) is not None]
        if not vals:
            return None
        return {"mean": statistics.fmean(vals), "min": min(vals), "max": max(vals)}

    return {"rows": len(rows), "messages": stats("messages"), "causal_time": stats("causal_time")}


# --- entry point -----------------------------------------------------------------


def run_scenario(config: dict, seed: int | None = None, limit: int | None = None,
                 trace: bool = True) -> RunReport:
    """Validate ``config`` and run it once per seed.

    ``seed`` overrides the config's seed list; ``limit`` overrides its event
    limit, which applies to each engine run separately.
    """
    validate(config, SCENARIO_SCHEMA)
    config = _lift_params(copy.deepcopy(config))
    name = config.get("name", config["protocol"])
    protocol = config["protocol"]
    seeds = [seed] if seed is not None else seed_list(config)
    limit = limit or config.get("limit", DEFAULT_LIMIT)
    runner = _run_quantum if protocol == "quantum" else _run_classical
    rows, records = [], []
    for s in seeds:
        run_rows, run_records = runner(config, s, limit, trace)
        for r in run_rows:
            r.update(scenario=name, protocol=protocol, n=config["topology"]["n"], seed=s)
        rows.extend(run_rows)
        if trace:
            records.append({"type": "run", "scenario": name, "protocol": protocol,
                            "n": config["topology"]["n"], "seed": s})
            records.extend(run_records)
    verdicts = scenario_verdicts(rows, _expectations(config))
    return RunReport(name, protocol, rows, verdicts, aggregates(rows), records)
