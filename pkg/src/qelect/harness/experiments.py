"""Batch experiments built on ``run_scenario``.

Each returns plain rows for CSV output plus a list of verdicts.
"""

from __future__ import annotations

import copy
import statistics
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import ConfigError, ElectionLabError
from .defaults import DEFAULTS
from .io import render_csv
from .scenario import Verdict, run_scenario, seed_list
from .schema import SWEEP_SCHEMA, validate

SWEEP_COLUMNS = ["protocol", "n", "runs", "errors", "worst_messages", "mean_messages",
                 "worst_total_messages", "worst_causal_time", "mean_causal_time"]
FAIRNESS_COLUMNS = ["leader", "count", "expected"]
FAULT_COLUMNS = ["n", "f", "seed", "b", "crashed", "leader", "leader_alive", "messages",
                 "bound", "path", "terminated", "snap_violations"]
FLP_COLUMNS = ["case", "target", "terminated", "events", "leader_changes", "messages", "leader"]


@dataclass
class ExperimentResult:
    rows: list
    columns: list
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    reports: list = field(default_factory=list, repr=False)

    def csv(self) -> str:
        return render_csv(self.rows, self.columns)

    @property
    def passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts)


# --- complexity sweep ---------------------------------------------------------------

# worst-case or representative configuration per protocol
SWEEP_TEMPLATES = {
    "quantum": {"topology": {"kind": "clique"}, "params": {"rounds": 3}},
    "chang-roberts": {"topology": {"kind": "ring", "direction": "uni", "id_order": "reversed"}},
    "dkr": {"topology": {"kind": "ring", "direction": "uni", "id_order": "random"}},
    "hirschberg-sinclair": {"topology": {"kind": "ring", "direction": "bi", "id_order": "random"}},
    "itai-rodeh": {"topology": {"kind": "ring", "direction": "uni", "anonymous": True},
                   "delay": {"model": "synchronous", "bound": 1}},
    "bully": {"topology": {"kind": "clique"}, "params": {"initiators": [0]}},
}


def _entry(spec) -> dict:
    if isinstance(spec, str):
        spec = {"protocol": spec}
    base = copy.deepcopy(SWEEP_TEMPLATES[spec["protocol"]])
    base["protocol"] = spec["protocol"]
    base["label"] = spec.get("label", spec["protocol"])
    base["topology"].update(spec.get("topology", {}))
    if "params" in spec:
        base.setdefault("params", {}).update(spec["params"])
    if "delay" in spec:
        base["delay"] = spec["delay"]
    return base


def _metric(row) -> int:
    """Election-phase messages where the protocol separates them out."""
    value = row.get("election_messages")
    return row["messages"] if value is None else value


def loglog_slope(ns, values) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


def sweep_complexity(protocols, n_list, seeds=(0,), delay=None, limit=None,
                     expect=None) -> ExperimentResult:
    """Worst and mean message counts per (protocol, n) plus log-log slopes.

    ``expect`` maps a protocol label to ``{"center", "tolerance"}`` or
    ``{"range": [lo, hi]}`` and yields one slope verdict per entry.
    """
    rows, slopes, errors = [], {}, []
    for spec in protocols:
        entry = _entry(spec)
        label = entry.pop("label")
        worst_by_n = {}
        for n in n_list:
            msgs, totals, times, failed = [], [], [], 0
            for s in seeds:
                cfg = copy.deepcopy(entry)
                cfg["topology"]["n"] = n
                if delay is not None and "delay" not in cfg:
                    cfg["delay"] = delay
                try:
                    rep = run_scenario(cfg, seed=s, limit=limit, trace=False)
                except ElectionLabError as exc:
                    failed += 1
                    errors.append({"protocol": label, "n": n, "seed": s, "error": str(exc)})
                    continue
                for r in rep.rows:
                    msgs.append(_metric(r))
                    totals.append(r["messages"])
                    times.append(r["causal_time"])
            row = {"protocol": label, "n": n, "runs": len(seeds), "errors": failed}
            if msgs:
                row.update(worst_messages=max(msgs), mean_messages=statistics.fmean(msgs),
                           worst_total_messages=max(totals), worst_causal_time=max(times),
                           mean_causal_time=statistics.fmean(times))
                worst_by_n[n] = max(msgs)
            rows.append(row)
        if len(worst_by_n) >= 2:
            slopes[label] = loglog_slope(list(worst_by_n), list(worst_by_n.values()))
    verdicts = []
    for label, target in (expect or {}).items():
        slope = slopes.get(label)
        if "range" in target:
            lo, hi = target["range"]
            bound = [lo, hi]
        else:
            lo = target["center"] - target["tolerance"]
            hi = target["center"] + target["tolerance"]
            bound = f"{target['center']} +/- {target['tolerance']}"
        verdicts.append(Verdict(f"slope[{label}]", slope, bound,
                                slope is not None and lo <= slope <= hi))
    return ExperimentResult(rows, SWEEP_COLUMNS, verdicts, {"slopes": slopes, "errors": errors})


def run_sweep(config: dict, seed: int | None = None, limit: int | None = None) -> ExperimentResult:
    """``sweep`` command: validate a sweep file and run it."""
    validate(config, SWEEP_SCHEMA)
    seeds = [seed] if seed is not None else seed_list(config)
    return sweep_complexity(config["protocols"], config["n_list"], seeds,
                            config.get("delay"), limit or config.get("limit"), config.get("expect"))


# --- fairness ------------------------------------------------------------------------


def _is_power(n: int, d: int) -> bool:
    while n > 1 and n % d == 0:
        n //= d
    return n == 1


def experiment_fairness(n: int = 8, trials: int | None = None, seed: int = 0, d: int = 2,
                        significance: float | None = None,
                        min_trials_per_node: int | None = None) -> ExperimentResult:
    """Chi-square test of elected ids against the uniform distribution.

    Only sizes that are powers of ``d`` are accepted: otherwise values of B
    at or beyond n fall back to a deterministic Bully and bias the tally.
    """
    if not _is_power(n, d) or n < 2:
        raise ConfigError(f"n={n} is not a power of {d}; the leader distribution is biased", "/n")
    trials = DEFAULTS["fairness_trials"] if trials is None else trials
    alpha = DEFAULTS["chi_square_significance"] if significance is None else significance
    min_trials = (DEFAULTS["min_trials_per_node"] if min_trials_per_node is None
                  else min_trials_per_node) * n
    cfg = {"name": "fairness", "protocol": "quantum", "topology": {"kind": "clique", "n": n},
           "params": {"rounds": trials, "d": d, "record_events": False}, "seed": seed}
    rep = run_scenario(cfg, trace=False)
    counts = [0] * n
    for r in rep.rows:
        if r["leader"] is not None:
            counts[r["leader"]] += 1
    done = sum(counts)
    rows = [{"leader": v, "count": c, "expected": done / n} for v, c in enumerate(counts)]
    chi2, p = stats.chisquare(counts)
    if done < min_trials:
        verdict = Verdict("fairness", float(p), alpha, None,
                          f"underpowered: {done} trials < {min_trials}")
    else:
        verdict = Verdict("fairness", float(p), alpha, bool(p >= alpha),
                          f"chi2={chi2:.3f} over {done} elections")
    return ExperimentResult(rows, FAIRNESS_COLUMNS, [verdict],
                            {"chi2": float(chi2), "p_value": float(p), "counts": counts}, [rep])


# --- FLP stall ------------------------------------------------------------------------

STALL_KINDS = {"trigger": "trigger", "m_e": "trigger", "acks": "ack", "ack": "ack",
               "shares": "shares"}


def experiment_flp_stall(n: int = 8, target: str = "trigger", limit: int | None = None,
                         seed: int = 0, control_limit: int | None = None,
                         spread: int | None = None) -> ExperimentResult:
    """Run one election under a stall adversary and one without it.

    The stall withholds every message of the targeted kind sent from the
    first election onward. The adversary case passes when the engine hits
    the event limit with no leader change; the control case passes when it
    elects within ``control_limit`` events.
    """
    if target not in STALL_KINDS:
        raise ConfigError(f"unknown stall target {target!r}", "/target")
    limit = DEFAULTS["flp_limit"] if limit is None else limit
    control_limit = DEFAULTS["flp_control_limit"] if control_limit is None else control_limit
    spread = DEFAULTS["nominal_bound"] if spread is None else spread
    base = {"protocol": "quantum", "topology": {"kind": "clique", "n": n},
            "params": {"rounds": 1}, "seed": seed}
    stalled = copy.deepcopy(base)
    stalled["name"] = f"flp-{target}"
    stalled["delay"] = {"model": "asynchronous", "spread": spread,
                        "stall": {"kinds": [STALL_KINDS[target]], "min_round": 0}}
    control = copy.deepcopy(base)
    control["name"] = "flp-control"
    control["delay"] = {"model": "asynchronous", "spread": spread}
    rep_s = run_scenario(stalled, limit=limit, trace=False)
    rep_c = run_scenario(control, limit=limit, trace=False)
    s, c = rep_s.rows[-1], rep_c.rows[-1]
    rows = [
        {"case": "adversary", "target": target, **{k: s.get(k) for k in FLP_COLUMNS[2:]}},
        {"case": "control", "target": "none", **{k: c.get(k) for k in FLP_COLUMNS[2:]}},
    ]
    stall_ok = (not s["terminated"]) and s["leader_changes"] == 0 and s["events"] >= limit
    control_ok = bool(c["terminated"]) and c["leader"] is not None and c["events"] < control_limit
    verdicts = [
        Verdict(f"flp[{target}]", {"terminated": s["terminated"], "events": s["events"],
                                   "leader_changes": s["leader_changes"]},
                {"terminated": False, "events": limit, "leader_changes": 0}, stall_ok),
        Verdict(f"flp-control[{target}]", c["events"], f"< {control_limit} events", control_ok),
    ]
    return ExperimentResult(rows, FLP_COLUMNS, verdicts, reports=[rep_s, rep_c])


# --- fault tolerance -------------------------------------------------------------------


def fault_bound(n: int, f: int, c: float) -> float:
    return 3 * (n - 1) + c * (f + 1) ** 2


def experiment_fault_tolerance(n: int = 32, f_list=(1, 2, 4), seeds=range(100),
                               c: float | None = None, crash_count: int | None = None,
                               trace: bool = False) -> ExperimentResult:
    """Crash the measured winner plus ``f - 1`` others at the election trigger.

    ``crash_count`` overrides the number of crashes (``f`` by default).
    """
    c = DEFAULTS["fault_bound_c"] if c is None else c
    for i, f in enumerate(f_list):
        if f >= n:
            raise ConfigError(f"f={f} must be below n={n}", f"/f_list/{i}")
    rows, reports = [], []
    worst, alive_ok, snap_ok = {}, {}, True
    for f in f_list:
        k = f if crash_count is None else crash_count
        for s in seeds:
            cfg = {"name": f"fault-f{f}", "protocol": "quantum",
                   "topology": {"kind": "clique", "n": n},
                   "params": {"f": f, "rounds": 1, "adversary": "crash-winner", "crash_count": k},
                   "seed": s}
            rep = run_scenario(cfg, trace=trace)
            reports.append(rep)
            r = rep.rows[-1]
            bound = fault_bound(n, f, c)
            rows.append({"n": n, "f": f, "seed": s, "b": r.get("b"), "crashed": r.get("crashed"),
                         "leader": r.get("leader"), "leader_alive": r.get("leader_alive"),
                         "messages": r.get("messages"), "bound": bound, "path": r.get("path"),
                         "terminated": r.get("terminated"),
                         "snap_violations": r.get("snap_violations")})
            worst[f] = max(worst.get(f, 0), r.get("messages") or 0)
            alive_ok[f] = alive_ok.get(f, True) and bool(r.get("leader_alive")) and bool(r.get("terminated"))
            snap_ok = snap_ok and not r.get("snap_violations")
    verdicts = []
    for f in f_list:
        bound = fault_bound(n, f, c)
        if crash_count is None:
            verdicts.append(Verdict(f"fault-bound[n={n},f={f}]", worst[f], bound, worst[f] <= bound))
        verdicts.append(Verdict(f"leader-alive[n={n},f={f}]", alive_ok[f], True, alive_ok[f]))
    return ExperimentResult(rows, FAULT_COLUMNS, verdicts,
                            {"worst": worst, "c": c, "snap_ok": snap_ok}, reports)
