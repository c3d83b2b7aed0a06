"""Flat-file outputs: CSV metrics, JSONL traces, and a trace reader.

The reader works on parsed JSONL records only. It shares no code with the
engine, so the figures it recomputes are an independent check on the
numbers a run reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from pathlib import Path

RUN_COLUMNS = [
    "scenario", "protocol", "n", "seed", "round", "initiator", "b", "crashed",
    "leader", "leader_alive", "agreement", "terminated", "messages",
    "election_messages", "total_messages", "classical_messages", "quantum_messages",
    "causal_time", "events", "phases", "leader_changes", "path", "snap_violations",
]

# kinds that make up the election phase of each classical protocol
ELECTION_KINDS = {
    "chang-roberts": {"elect"},
    "dkr": {"one", "two"},
    "hirschberg-sinclair": {"probe", "reply"},
    "itai-rodeh": {"token"},
    "bully": {"election", "ok"},
}
QUANTUM_IGNORED = {"heartbeat"}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(round(value, 10))
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v) for v in value)
    return str(value)


def render_csv(rows, columns=None) -> str:
    rows = list(rows)
    columns = columns or RUN_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None) -> None:
    Path(path).write_text(render_csv(rows, columns))


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def dumps(record) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def render_jsonl(records) -> str:
    return "".join(dumps(r) + "\n" for r in records)


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --- independent trace reader ------------------------------------------------


def longest_chain(messages) -> int:
    """Longest causal chain over ``messages`` (parsed envelope records).

    A delivery at step s happens before any send performed at step s or
    later by the receiving node.
    """
    points = []
    for m in messages:
        points.append((m["send_step"], 1, m["msg_id"], m))
        if m["status"] == "delivered":
            points.append((m["deliver_step"], 0, m["msg_id"], m))
    points.sort(key=lambda p: p[:3])
    known = defaultdict(int)
    depth = {}
    best = 0
    for _, is_send, mid, m in points:
        if is_send:
            depth[mid] = known[m["src"]] + 1
        else:
            known[m["dst"]] = max(known[m["dst"]], depth[mid])
            best = max(best, depth[mid])
    return best


def _kind(m):
    return (m.get("payload") or {}).get("kind")


def _round(m):
    return (m.get("payload") or {}).get("round")


def recompute(records) -> list:
    """Rebuild per-row metrics from a trace.

    Returns one dict per ``row`` marker found in the trace, carrying the
    recomputed message counts, causal time and snap violations alongside
    the marker's identifying fields.
    """
    out = []
    segment = []
    run = None
    measured = defaultdict(set)
    for rec in records:
        kind = rec.get("type")
        if kind == "run":
            run, segment = rec, []
            measured = defaultdict(set)
        elif kind == "round-begin":
            segment = []
        elif kind == "envelope":
            segment.append(rec)
        elif kind == "measured":
            measured[rec["state"]].add(rec["digit"])
        elif kind == "row":
            out.append(_summarise(run, rec, segment, measured))
            segment = []
    return out


def _summarise(run, marker, segment, measured) -> dict:
    protocol = run["protocol"]
    row = {"seed": run["seed"], "protocol": protocol, "round": marker["round"]}
    if protocol == "quantum":
        chosen = [m for m in segment
                  if _round(m) == marker["round"] and _kind(m) not in QUANTUM_IGNORED]
        by_kind = Counter(_kind(m) for m in chosen)
        row["messages"] = len(chosen)
        row["by_kind"] = dict(sorted(by_kind.items()))
        row["causal_time"] = longest_chain(chosen)
    else:
        kinds = ELECTION_KINDS[protocol]
        row["messages"] = len(segment)
        row["election_messages"] = sum(1 for m in segment if _kind(m) in kinds)
        row["causal_time"] = longest_chain(segment)
    row["classical_messages"] = sum(1 for m in segment if m["channel"] == "classical")
    row["quantum_messages"] = sum(1 for m in segment if m["channel"] == "quantum")
    row["snap_violations"] = sum(1 for digits in measured.values() if len(digits) > 1)
    return row
