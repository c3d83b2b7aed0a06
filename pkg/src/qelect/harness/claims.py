"""Named claim checks and the ``verify`` driver.

A claims file either names the built-in acceptance suite
(``{"suite": "acceptance"}``) or lists claims explicitly::

    {"claims": [{"claim": "quantum-tally", "params": {"n_list": [4, 8]}}]}

Every check returns verdicts carrying the measured value and the bound.
"""

from __future__ import annotations

import itertools
import json
import random
import statistics
from importlib import resources

from ..election_quantum import QuantumElection, QuantumParams
from ..elections_classical import (
    run_bully,
    run_chang_roberts,
    run_dkr,
    run_hirschberg_sinclair,
    run_itai_rodeh,
)
from ..errors import ConfigError
from ..simnet import FaultPlan, Synchronous
from ..topology import build_clique, build_ring
from .defaults import DEFAULTS
from .experiments import (
    experiment_fairness,
    experiment_fault_tolerance,
    experiment_flp_stall,
    run_sweep,
    sweep_complexity,
)
from .io import recompute
from .oracles import itai_rodeh_phases_mc
from .scenario import Verdict, run_scenario
from .schema import CLAIMS_SCHEMA, validate


class Context:
    """Shared state across the claims of one ``verify`` call."""

    def __init__(self, seed: int = 0, limit: int | None = None):
        self.seed = seed
        self.limit = limit
        self.tally_reports = {}
        self.snap_checked = 0
        self.snap_violations = 0
        self.snap_sources = set()

    def note_snap(self, source: str, rows) -> None:
        self.snap_sources.add(source)
        for r in rows:
            self.snap_checked += 1
            self.snap_violations += r.get("snap_violations") or 0


def _tally_scenario(n: int, rounds: int, seed: int) -> dict:
    return {"name": f"tally-n{n}", "protocol": "quantum", "topology": {"kind": "clique", "n": n},
            "params": {"rounds": rounds}, "seed": seed}


def _tally(ctx: Context, n_list, rounds) -> dict:
    key = (tuple(n_list), rounds)
    if key not in ctx.tally_reports:
        reps = {n: run_scenario(_tally_scenario(n, rounds, ctx.seed)) for n in n_list}
        for rep in reps.values():
            ctx.note_snap("tally", rep.rows)
        ctx.tally_reports[key] = reps
    return ctx.tally_reports[key]


def _trace_agrees(rep, fields) -> bool:
    """True when the independent trace reader reproduces ``fields``."""
    again = recompute(rep.trace)
    if len(again) != len(rep.rows):
        return False
    return all(a[k] == r[k] for a, r in zip(again, rep.rows) for k in fields)


# --- 1 & 2 ------------------------------------------------------------------------------


def claim_quantum_tally(ctx, n_list=None, rounds=None):
    n_list = n_list or DEFAULTS["tally_n_list"]
    rounds = rounds or DEFAULTS["tally_rounds"]
    out = []
    for n, rep in _tally(ctx, n_list, rounds).items():
        counts = sorted({r["messages"] for r in rep.rows})
        split = {"ack": n - 1, "shares": n - 1, "trigger": n - 1}
        kinds_ok = all(r["by_kind"] == split for r in recompute(rep.trace))
        ok = (counts == [3 * (n - 1)] and len(rep.rows) == rounds and kinds_ok
              and _trace_agrees(rep, ["messages"]))
        out.append(Verdict(f"tally[n={n}]", counts[0] if len(counts) == 1 else counts, 3 * (n - 1), ok))
    return out


def claim_quantum_causal_time(ctx, n_list=None, rounds=None):
    n_list = n_list or DEFAULTS["tally_n_list"]
    rounds = rounds or DEFAULTS["tally_rounds"]
    target = DEFAULTS["tally_causal_time"]
    out = []
    for n, rep in _tally(ctx, n_list, rounds).items():
        times = sorted({r["causal_time"] for r in rep.rows})
        ok = times == [target] and _trace_agrees(rep, ["causal_time"])
        out.append(Verdict(f"causal-time[n={n}]", times[0] if len(times) == 1 else times, target, ok))
    return out


# --- 3 ------------------------------------------------------------------------------------


def claim_complexity_separation(ctx, n_list=None, seeds=None):
    n_list = n_list or DEFAULTS["slope_n_list"]
    seeds = seeds or [ctx.seed]
    expect = {k: dict(v) for k, v in DEFAULTS["slope_targets"].items()}
    res = sweep_complexity(["quantum", "chang-roberts", "bully"], n_list, seeds,
                           limit=ctx.limit, expect=expect)
    return res.verdicts


# --- 4 ------------------------------------------------------------------------------------


def claim_fault_tolerance(ctx, n=None, f_list=None, seeds=None, c=None):
    n = n or DEFAULTS["fault_n"]
    f_list = f_list or DEFAULTS["fault_f_list"]
    seeds = range(seeds or DEFAULTS["fault_seeds"])
    res = experiment_fault_tolerance(n, f_list, seeds, c)
    ctx.note_snap("fault-tolerance", res.rows)
    return res.verdicts


# --- 5 ------------------------------------------------------------------------------------


def claim_snap_consistency(ctx):
    if "tally" not in ctx.snap_sources:
        _tally(ctx, DEFAULTS["tally_n_list"], DEFAULTS["tally_rounds"])
    if "fault-tolerance" not in ctx.snap_sources:
        claim_fault_tolerance(ctx)
    if "sweep" not in ctx.snap_sources:
        res = sweep_complexity(["quantum"], DEFAULTS["slope_n_list"], [ctx.seed])
        ctx.snap_sources.add("sweep")
        ctx.snap_checked += len(res.rows)
    return [Verdict("snap-consistency", ctx.snap_violations, 0, ctx.snap_violations == 0,
                    f"{ctx.snap_checked} election rounds checked")]


# --- 6 ------------------------------------------------------------------------------------


def claim_fairness(ctx, n=8, trials=None):
    return experiment_fairness(n, trials, seed=ctx.seed).verdicts


# --- 7 ------------------------------------------------------------------------------------


def claim_flp_persistence(ctx, n=None, targets=("trigger", "shares"), limit=None):
    n = n or DEFAULTS["flp_n"]
    out = []
    for target in targets:
        out.extend(experiment_flp_stall(n, target, limit or DEFAULTS["flp_limit"], ctx.seed).verdicts)
    return out


# --- 8 ------------------------------------------------------------------------------------

_RING_RUNNERS = {
    "chang-roberts": ("uni", lambda t, d, s: run_chang_roberts(t, d, s)),
    "dkr": ("uni", lambda t, d, s: run_dkr(t, d, s)),
    "hirschberg-sinclair": ("bi", lambda t, d, s: run_hirschberg_sinclair(t, d, s)),
}


def _hs_cap(n: int) -> int:
    return DEFAULTS["hs_message_factor"] * n * ((n - 1).bit_length() + 1)


def _bully_case(n, initiator, crashed, seed, delay):
    faults = FaultPlan([(v, 0) for v in crashed]) if crashed else None
    res = run_bully(build_clique(n), initiators=(initiator,), faults=faults, delay=delay, seed=seed)
    expected = max(v for v in range(n) if v not in crashed)
    return res.metrics.terminated and res.agreement and res.leader == expected


def claim_classical_correctness(ctx, max_n=None, random_n=None, random_seeds=None,
                                ir_runs=None, ir_n_list=None, ir_tolerance=None):
    max_n = max_n or DEFAULTS["classical_exhaustive_max_n"]
    random_n = random_n or DEFAULTS["classical_random_n"]
    random_seeds = random_seeds or DEFAULTS["classical_random_seeds"]
    ir_runs = ir_runs or DEFAULTS["itai_rodeh_runs"]
    ir_n_list = ir_n_list or DEFAULTS["itai_rodeh_n_list"]
    ir_tolerance = ir_tolerance or DEFAULTS["itai_rodeh_phase_tolerance"]
    delay = Synchronous(DEFAULTS["nominal_bound"])
    bad = {name: 0 for name in (*_RING_RUNNERS, "bully")}
    runs = {name: 0 for name in bad}
    hs_worst_ratio = 0.0

    def ring_check(name, order, seed):
        nonlocal hs_worst_ratio
        direction, runner = _RING_RUNNERS[name]
        n = len(order)
        res = runner(build_ring(n, direction, order), delay, seed)
        runs[name] += 1
        if not (res.metrics.terminated and res.agreement and res.leader == n - 1):
            bad[name] += 1
        if name == "hirschberg-sinclair":
            hs_worst_ratio = max(hs_worst_ratio, res.messages / _hs_cap(n))

    for n in range(2, max_n + 1):
        for i, order in enumerate(itertools.permutations(range(n))):
            for name in _RING_RUNNERS:
                ring_check(name, list(order), i)
            # bully has no ring order: the permutation picks the initiator
            # and how many of the top ids are down before the run
            down = [v for v in range(n - 1, -1, -1) if v != order[0]][: i % min(3, n)]
            runs["bully"] += 1
            bad["bully"] += not _bully_case(n, order[0], down, i, delay)
    for s in range(random_seeds):
        rng = random.Random(f"classical/{s}")
        order = list(range(random_n))
        rng.shuffle(order)
        for name in _RING_RUNNERS:
            ring_check(name, order, s)
        down = rng.sample(range(random_n), rng.randint(0, 3))
        initiator = rng.choice([v for v in range(random_n) if v not in down])
        runs["bully"] += 1
        bad["bully"] += not _bully_case(random_n, initiator, down, s, delay)
    out = [Verdict(f"max-id[{name}]", runs[name] - bad[name], runs[name], bad[name] == 0,
                   f"{bad[name]} wrong of {runs[name]}") for name in bad]
    out.append(Verdict("hs-message-cap", round(hs_worst_ratio, 4), 1.0, hs_worst_ratio <= 1.0,
                       "worst messages / 8n(ceil(log2 n)+1)"))
    for n in ir_n_list:
        ring = build_ring(n, anonymous=True)
        winners_ok, phases = 0, []
        for s in range(ir_runs):
            res = run_itai_rodeh(ring, n, Synchronous(1), s)
            winners_ok += len(res.winners) == 1 and res.agreement
            phases.append(res.phases)
        oracle = itai_rodeh_phases_mc(n, DEFAULTS["itai_rodeh_oracle_samples"], seed=n)
        mean = statistics.fmean(phases)
        out.append(Verdict(f"itai-rodeh-unique[n={n}]", winners_ok, ir_runs, winners_ok == ir_runs))
        out.append(Verdict(f"itai-rodeh-phases[n={n}]", round(mean, 4),
                           f"{oracle:.4f} +/- {ir_tolerance}", abs(mean - oracle) <= ir_tolerance))
    return out


# --- 9 ------------------------------------------------------------------------------------


def determinism_scenarios(seed: int = 0) -> list:
    """One representative scenario per criterion, sized to run quickly."""
    return [
        _tally_scenario(8, 3, seed),
        {"name": "cr-worst", "protocol": "chang-roberts",
         "topology": {"kind": "ring", "n": 16, "id_order": "reversed"}, "seed": seed},
        {"name": "bully-worst", "protocol": "bully", "topology": {"kind": "clique", "n": 16},
         "params": {"initiators": [0]}, "seed": seed},
        {"name": "fault", "protocol": "quantum", "topology": {"kind": "clique", "n": 32},
         "params": {"f": 2, "adversary": "crash-winner"}, "seed": seed},
        {"name": "fairness-slice", "protocol": "quantum", "topology": {"kind": "clique", "n": 8},
         "params": {"rounds": 50}, "seed": seed},
        {"name": "flp-slice", "protocol": "quantum", "topology": {"kind": "clique", "n": 8},
         "delay": {"model": "asynchronous", "spread": 3,
                   "stall": {"kinds": ["trigger"], "min_round": 0}},
         "limit": 5000, "expect": {"terminated": False}, "seed": seed},
        {"name": "hs-random", "protocol": "hirschberg-sinclair",
         "topology": {"kind": "ring", "n": 16, "direction": "bi", "id_order": "random"},
         "seed": seed},
        {"name": "dkr-random", "protocol": "dkr",
         "topology": {"kind": "ring", "n": 16, "id_order": "random"}, "seed": seed},
        {"name": "itai-rodeh", "protocol": "itai-rodeh",
         "topology": {"kind": "ring", "n": 8, "anonymous": True}, "seed": seed},
    ]


def claim_determinism(ctx, scenarios=None):
    scenarios = scenarios or determinism_scenarios(ctx.seed)
    same = 0
    for cfg in scenarios:
        a, b = run_scenario(cfg), run_scenario(cfg)
        same += a.csv() == b.csv() and a.jsonl() == b.jsonl()
    sweep = {"protocols": ["quantum", "chang-roberts"], "n_list": [4, 8], "seeds": [ctx.seed]}
    s1, s2 = run_sweep(sweep), run_sweep(sweep)
    same += s1.csv() == s2.csv()
    total = len(scenarios) + 1
    return [Verdict("determinism", same, total, same == total,
                    "byte-identical CSV and JSONL on re-run")]


CLAIMS = {
    "quantum-tally": claim_quantum_tally,
    "quantum-causal-time": claim_quantum_causal_time,
    "complexity-separation": claim_complexity_separation,
    "fault-tolerance": claim_fault_tolerance,
    "snap-consistency": claim_snap_consistency,
    "fairness": claim_fairness,
    "flp-persistence": claim_flp_persistence,
    "classical-correctness": claim_classical_correctness,
    "determinism": claim_determinism,
}

ACCEPTANCE = list(CLAIMS)


def load_acceptance() -> dict:
    return json.loads(resources.files(__package__).joinpath("acceptance.json").read_text())


def verify(claims: dict, seed: int | None = None, limit: int | None = None,
           progress=None) -> list:
    """Evaluate a claims document; returns ``[(claim, [Verdict, ...]), ...]``."""
    validate(claims, CLAIMS_SCHEMA)
    entries = load_acceptance()["claims"] if claims.get("suite") == "acceptance" else []
    entries = entries + claims.get("claims", [])
    ctx = Context(seed if seed is not None else 0, limit)
    results = []
    for i, entry in enumerate(entries):
        fn = CLAIMS.get(entry["claim"])
        if fn is None:
            raise ConfigError(f"unknown claim {entry['claim']!r}", f"/claims/{i}/claim")
        try:
            verdicts = fn(ctx, **entry.get("params", {}))
        except TypeError as exc:
            raise ConfigError(str(exc), f"/claims/{i}/params") from None
        results.append((entry["claim"], verdicts))
        if progress is not None:
            progress(entry["claim"], verdicts)
    return results
