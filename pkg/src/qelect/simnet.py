"""Deterministic discrete-event network.

Messages travel between processes registered on a :class:`Network`. Each
send draws an integer delay from the configured delay model using the run's
seeded RNG; the engine pops events in ``(time, sequence)`` order, so ties
resolve by send order and the whole run is reproducible from the seed.

Processes are plain objects with ``on_start``, ``on_message`` and
``on_timer`` hooks (see :class:`Process`). Timers are local events and are
never counted as messages.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .errors import TopologyViolation
from .topology import Topology

log = logging.getLogger(__name__)

CLASSICAL = "classical"
QUANTUM = "quantum"
INF = math.inf

_DELIVER, _TIMER, _CALL = 0, 1, 2


@dataclass
class Msg:
    """Protocol payload: a kind tag, the election round it serves, and data."""

    kind: str
    round: int | None = None
    data: Any = None

    def to_json(self):
        return {"kind": self.kind, "round": self.round, "data": jsonable(self.data)}


def jsonable(value):
    if hasattr(value, "to_json"):
        return value.to_json()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


@dataclass
class Envelope:
    msg_id: int
    src: int
    dst: int
    payload: Any
    channel: str
    send_time: int
    deliver_time: float
    causal_depth: int
    send_step: int
    deliver_step: int | None = None
    status: str = "in-flight"

    @property
    def kind(self) -> str | None:
        return getattr(self.payload, "kind", None)

    @property
    def round(self) -> int | None:
        return getattr(self.payload, "round", None)

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"

    def to_json(self):
        return {
            "type": "envelope",
            "msg_id": self.msg_id,
            "src": self.src,
            "dst": self.dst,
            "channel": self.channel,
            "payload": jsonable(self.payload),
            "send_time": self.send_time,
            "deliver_time": None if self.deliver_time == INF else self.deliver_time,
            "causal_depth": self.causal_depth,
            "send_step": self.send_step,
            "deliver_step": self.deliver_step,
            "status": self.status,
        }


@dataclass(frozen=True)
class MessageFilter:
    """Predicate over envelopes; ``None`` fields match anything."""

    kinds: frozenset | None = None
    src: frozenset | None = None
    dst: frozenset | None = None
    channel: str | None = None
    min_round: int | None = None

    def matches(self, env: Envelope) -> bool:
        if self.kinds is not None and env.kind not in self.kinds:
            return False
        if self.src is not None and env.src not in self.src:
            return False
        if self.dst is not None and env.dst not in self.dst:
            return False
        if self.channel is not None and env.channel != self.channel:
            return False
        if self.min_round is not None:
            r = env.round
            if r is None or r < self.min_round:
                return False
        return True

    @classmethod
    def from_json(cls, obj: dict) -> "MessageFilter":
        def _set(key):
            v = obj.get(key)
            if v is None:
                return None
            return frozenset(v if isinstance(v, list) else [v])

        return cls(
            kinds=_set("kinds"),
            src=_set("src"),
            dst=_set("dst"),
            channel=obj.get("channel"),
            min_round=obj.get("min_round"),
        )

    def to_json(self):
        out = {}
        for key in ("kinds", "src", "dst"):
            v = getattr(self, key)
            if v is not None:
                out[key] = sorted(v)
        if self.channel is not None:
            out["channel"] = self.channel
        if self.min_round is not None:
            out["min_round"] = self.min_round
        return out


# --- delay models ---------------------------------------------------------


@dataclass(frozen=True)
class Synchronous:
    """Every delay is in ``[1, bound]`` (exactly ``bound`` when ``fixed``)."""

    bound: int
    fixed: bool = False

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError("delay bound must be >= 1")

    def draw(self, rng: random.Random, send_time: int) -> int:
        return self.bound if self.fixed else rng.randint(1, self.bound)

    def stalls(self, env: Envelope) -> bool:
        return False

    @property
    def nominal_bound(self) -> int:
        return self.bound


@dataclass(frozen=True)
class PartiallySynchronous:
    """Delays up to ``pre_gst_max`` before ``gst``, then at most ``bound``."""

    gst: int
    bound: int
    pre_gst_max: int

    def __post_init__(self):
        if self.bound < 1 or self.pre_gst_max < 1 or self.gst < 0:
            raise ValueError("invalid partially synchronous parameters")

    def draw(self, rng: random.Random, send_time: int) -> int:
        if send_time >= self.gst:
            return rng.randint(1, self.bound)
        return rng.randint(1, self.pre_gst_max)

    def stalls(self, env: Envelope) -> bool:
        return False

    @property
    def nominal_bound(self) -> int:
        return self.bound


@dataclass(frozen=True)
class Asynchronous:
    """Unbounded delays plus an optional stall adversary.

    ``distribution`` is ``"uniform"`` (``[1, spread]``) or ``"geometric"``
    (``1 + Exp(mean=spread)`` floored, no upper bound). Messages matching
    ``stall`` are never delivered. Protocols that need a timeout use
    ``spread`` as their optimistic bound.
    """

    spread: int = 5
    distribution: str = "uniform"
    stall: MessageFilter | None = None

    def __post_init__(self):
        if self.spread < 1:
            raise ValueError("spread must be >= 1")
        if self.distribution not in ("uniform", "geometric"):
            raise ValueError(f"unknown distribution {self.distribution!r}")

    def draw(self, rng: random.Random, send_time: int) -> int:
        if self.distribution == "uniform":
            return rng.randint(1, self.spread)
        return 1 + int(rng.expovariate(1.0 / self.spread))

    def stalls(self, env: Envelope) -> bool:
        return self.stall is not None and self.stall.matches(env)

    @property
    def nominal_bound(self) -> int:
        return self.spread


# --- faults & metrics -----------------------------------------------------


@dataclass
class FaultPlan:
    crashes: list = field(default_factory=list)
    omissions: list = field(default_factory=list)
    f_max: int | None = None

    def __post_init__(self):
        self.crashes = [tuple(c) for c in self.crashes]
        if self.f_max is None:
            self.f_max = len(self.crashes)
        if len(self.crashes) > self.f_max:
            raise ValueError(f"{len(self.crashes)} crashes exceed f_max={self.f_max}")


@dataclass
class RunMetrics:
    messages_sent: dict
    messages_delivered: int
    time_complexity: int
    wall_steps: int
    terminated: bool
    quiescent_time: int | None
    suppressed_sends: int = 0
    dropped: int = 0

    @property
    def total_sent(self) -> int:
        return sum(self.messages_sent.values())

    def to_json(self):
        return {
            "messages_sent": dict(sorted(self.messages_sent.items())),
            "total_sent": self.total_sent,
            "messages_delivered": self.messages_delivered,
            "time_complexity": self.time_complexity,
            "wall_steps": self.wall_steps,
            "terminated": self.terminated,
            "quiescent_time": self.quiescent_time,
            "suppressed_sends": self.suppressed_sends,
            "dropped": self.dropped,
        }


class Process:
    """Base class for protocol automata; subclasses override the hooks."""

    def __init__(self, node: int):
        self.node = node
        self._timers = {}

    def on_start(self, net: "Network") -> None:
        pass

    def on_message(self, net: "Network", env: Envelope) -> None:
        pass

    def on_timer(self, net: "Network", tag) -> None:
        pass

    def arm(self, net: "Network", tag, delay: int) -> None:
        """(Re)start the local timer ``tag``; a re-armed timer replaces the old one."""
        self._timers[tag] = net._set_timer(self.node, delay, tag)

    def disarm(self, tag) -> None:
        self._timers.pop(tag, None)

    def disarm_all(self) -> None:
        self._timers.clear()

    def armed(self, tag) -> bool:
        return tag in self._timers


class Network:
    """Single-threaded event engine over a fixed topology."""

    def __init__(
        self,
        topology: Topology,
        delay,
        faults: FaultPlan | None = None,
        seed: int = 0,
        record_events: bool = True,
    ):
        self.topology = topology
        self.delay = delay
        self.faults = faults or FaultPlan()
        self.seed = seed
        self.rng = random.Random(seed)
        self.record_events = record_events
        self.now = 0
        self.step = 0
        self.processes = {}
        self.log = []
        self.diagnostics = []
        self._queue = []
        self._seq = 0
        self._next_msg = 0
        self._next_timer = 0
        self._crash_at = {}
        self._depth = Counter()
        self._sent = Counter()
        self._delivered = 0
        self._max_depth = 0
        self._suppressed = 0
        self._dropped = 0
        self._started = False
        for node, at in self.faults.crashes:
            self.inject_crash(node, at)

    # -- setup -----------------------------------------------------------

    def register(self, proc: Process) -> None:
        self.processes[proc.node] = proc

    def inject_crash(self, node: int, at: int) -> None:
        """Node stops acting at ``at``; messages it already sent stay in flight."""
        if at < 0:
            raise ValueError("crash time must be >= 0")
        self.topology._check(node)
        if node in self._crash_at:
            msg = f"duplicate crash of node {node} ignored"
            log.warning(msg)
            self.diagnostics.append(msg)
            return
        self._crash_at[node] = max(at, self.now)
        self.record("crash", node=node, at=self._crash_at[node])

    def alive(self, node: int, t: int | None = None) -> bool:
        c = self._crash_at.get(node)
        return c is None or (self.now if t is None else t) < c

    @property
    def crashed(self) -> set:
        return {v for v in self._crash_at if not self.alive(v)}

    def alive_nodes(self) -> list:
        return [v for v in self.topology.nodes if self.alive(v)]

    # -- scheduling ------------------------------------------------------

    def _push(self, time, kind, a, b=None):
        self._seq += 1
        heapq.heappush(self._queue, (time, self._seq, kind, a, b))

    def schedule_send(self, src: int, dst: int, payload, channel: str = CLASSICAL, now=None):
        """Enqueue a message; returns its id, or ``None`` if ``src`` has crashed."""
        now = self.now if now is None else now
        if not self.alive(src, now):
            self._suppressed += 1
            return None
        if not self.topology.has_edge(src, dst):
            raise TopologyViolation(f"no channel {src} -> {dst}")
        msg_id = self._next_msg
        self._next_msg += 1
        env = Envelope(
            msg_id=msg_id,
            src=src,
            dst=dst,
            payload=payload,
            channel=channel,
            send_time=now,
            deliver_time=INF,
            causal_depth=self._depth[src] + 1,
            send_step=self.step,
        )
        delay = self.delay.draw(self.rng, now)
        if any(f.matches(env) for f in self.faults.omissions):
            env.status = "dropped"
            self._dropped += 1
        elif self.delay.stalls(env):
            env.status = "stalled"
        else:
            env.deliver_time = now + delay
            self._push(env.deliver_time, _DELIVER, env)
        self._sent[channel] += 1
        self.log.append(env)
        return msg_id

    send = schedule_send

    def broadcast(self, src: int, payload, targets: Iterable[int], channel: str = CLASSICAL):
        for dst in targets:
            if dst != src:
                self.schedule_send(src, dst, payload, channel)

    def _set_timer(self, node: int, delay: int, tag):
        if delay < 1:
            raise ValueError("timer delay must be >= 1")
        self._next_timer += 1
        token = self._next_timer
        self._push(self.now + delay, _TIMER, node, (tag, token))
        return token

    def call_at(self, time: int, node: int, fn: Callable[["Network"], Any]) -> None:
        """Run ``fn(net)`` at ``time`` on behalf of ``node`` (skipped if it crashed)."""
        self._push(max(time, self.now), _CALL, node, fn)

    def record(self, event: str, **fields) -> None:
        if self.record_events:
            self.log.append({"type": event, "t": self.now, "step": self.step, **fields})

    # -- execution -------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for node in sorted(self.processes):
            if self.alive(node):
                self.processes[node].on_start(self)

    def run_to_quiescence(self, limit: int = 10**6, stop: Callable[[], bool] | None = None) -> RunMetrics:
        """Process up to ``limit`` events; stop early when idle or ``stop()`` holds."""
        if limit <= 0:
            raise ValueError("limit must be positive")
        self.start()
        queue = self._queue
        processed = 0
        stopped = stop is not None and stop()
        while queue and not stopped and processed < limit:
            time, _, kind, a, b = heapq.heappop(queue)
            self.now = time
            self.step += 1
            processed += 1
            if kind == _DELIVER:
                self._deliver(a)
            elif kind == _TIMER:
                proc = self.processes.get(a)
                tag, token = b
                if proc is not None and self.alive(a) and proc._timers.get(tag) == token:
                    del proc._timers[tag]
                    proc.on_timer(self, tag)
            elif self.alive(a):
                b(self)
            if stop is not None:
                stopped = stop()
        return self.metrics(terminated=stopped or not queue)

    run = run_to_quiescence

    def _deliver(self, env: Envelope) -> None:
        env.deliver_step = self.step
        if not self.alive(env.dst):
            env.status = "lost"
            return
        env.status = "delivered"
        self._delivered += 1
        if env.causal_depth > self._depth[env.dst]:
            self._depth[env.dst] = env.causal_depth
        if env.causal_depth > self._max_depth:
            self._max_depth = env.causal_depth
        proc = self.processes.get(env.dst)
        if proc is not None:
            proc.on_message(self, env)

    def metrics(self, terminated: bool = True) -> RunMetrics:
        return RunMetrics(
            messages_sent={CLASSICAL: self._sent[CLASSICAL], QUANTUM: self._sent[QUANTUM]},
            messages_delivered=self._delivered,
            time_complexity=self._max_depth,
            wall_steps=self.step,
            terminated=terminated,
            quiescent_time=self.now if terminated else None,
            suppressed_sends=self._suppressed,
            dropped=self._dropped,
        )

    @property
    def trace(self) -> list:
        """Envelopes in send order."""
        return [r for r in self.log if isinstance(r, Envelope)]

    def pending(self) -> int:
        return len(self._queue)


def envelopes(trace) -> list:
    return [r for r in trace if isinstance(r, Envelope)]


def elapsed_causal_time(trace, select: Callable[[Envelope], bool] | None = None) -> int:
    """Longest causal chain among delivered messages of ``trace``.

    Without ``select`` this is the maximum recorded ``causal_depth``. With
    ``select`` the chain is recomputed over the selected messages only: a
    selected message extends a chain ending in any selected message that
    was delivered to its sender no later than the step it was sent in.
    """
    envs = envelopes(trace)
    if select is None:
        return max((e.causal_depth for e in envs if e.delivered), default=0)
    chosen = sorted((e for e in envs if select(e)), key=lambda e: (e.send_step, e.msg_id))
    arrivals = sorted(
        (e for e in chosen if e.delivered), key=lambda e: (e.deliver_step, e.msg_id)
    )
    depth = {}
    best_at = Counter()
    i = 0
    result = 0
    for e in chosen:
        while i < len(arrivals) and arrivals[i].deliver_step <= e.send_step:
            a = arrivals[i]
            best_at[a.dst] = max(best_at[a.dst], depth[a.msg_id])
            i += 1
        depth[e.msg_id] = best_at[e.src] + 1
        if e.delivered:
            result = max(result, depth[e.msg_id])
    return result
