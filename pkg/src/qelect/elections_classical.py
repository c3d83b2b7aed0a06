"""Classical leader election protocols as automata over :mod:`qelect.simnet`.

* Chang-Roberts and Dolev-Klawe-Rodeh on unidirectional rings,
* Hirschberg-Sinclair on bidirectional rings,
* Itai-Rodeh on anonymous rings of known size (synchronous),
* Bully on cliques, with crash faults and timeouts.

Every ``run_*`` function builds a :class:`~qelect.simnet.Network`, runs it to
quiescence and returns an :class:`ElectionResult`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import ModelMismatch, TopologyMismatch, UnsoundTimeout
from .simnet import (
    Asynchronous,
    FaultPlan,
    Msg,
    Network,
    PartiallySynchronous,
    Process,
    RunMetrics,
    Synchronous,
)
from .topology import BI, UNI, Topology

DEFAULT_LIMIT = 10**6


@dataclass
class ElectionResult:
    leader: int | None
    views: dict
    metrics: RunMetrics
    rounds: int | None = None
    agreement: bool = True
    election_messages: int | None = None
    phases: int | None = None
    network: Network | None = field(default=None, repr=False)

    @property
    def messages(self) -> int:
        return self.metrics.total_sent


def _collect(net: Network, procs: dict, metrics: RunMetrics, election_kinds=None, **extra) -> ElectionResult:
    alive = [v for v in sorted(procs) if net.alive(v)]
    views = {v: procs[v].leader for v in alive}
    believed = {views[v] for v in alive}
    agreement = len(believed) <= 1
    leader = believed.pop() if agreement and believed else None
    count = None
    if election_kinds is not None:
        count = sum(1 for e in net.trace if e.kind in election_kinds)
    return ElectionResult(leader, views, metrics, agreement=agreement,
                          election_messages=count, network=net, **extra)


def _require_ring(t: Topology, direction: str, name: str) -> None:
    if t.kind != "ring" or t.direction != direction:
        raise TopologyMismatch(f"{name} needs a {direction}directional ring, got {t.direction} {t.kind}")
    if t.anonymous:
        raise TopologyMismatch(f"{name} needs node identifiers")


def _initiator_set(t: Topology, initiators) -> set:
    return set(t.nodes) if initiators is None else set(initiators)


# --- Chang-Roberts --------------------------------------------------------


class ChangRobertsNode(Process):
    def __init__(self, node: int, successor: int, initiator: bool = True):
        super().__init__(node)
        self.successor = successor
        self.initiator = initiator
        self.participant = False
        self.leader = None

    def _send(self, net, kind, value):
        net.send(self.node, self.successor, Msg(kind, data=value))

    def on_start(self, net):
        if self.initiator:
            self.participant = True
            self._send(net, "elect", self.node)

    def on_message(self, net, env):
        value = env.payload.data
        if env.kind == "elect":
            if value > self.node:
                self.participant = True
                self._send(net, "elect", value)
            elif value < self.node:
                if not self.participant:
                    self.participant = True
                    self._send(net, "elect", self.node)
            else:
                self.leader = self.node
                self._send(net, "leader", self.node)
        elif env.kind == "leader" and value != self.node:
            self.leader = value
            self._send(net, "leader", value)


def run_chang_roberts(t: Topology, delay=None, seed: int = 0, initiators=None,
                      limit: int = DEFAULT_LIMIT) -> ElectionResult:
    """Highest id wins; every node in ``initiators`` (default all) starts."""
    _require_ring(t, UNI, "Chang-Roberts")
    net = Network(t, delay or Synchronous(1), seed=seed)
    starters = _initiator_set(t, initiators)
    procs = {v: ChangRobertsNode(v, t.successor(v), v in starters) for v in t.nodes}
    for p in procs.values():
        net.register(p)
    metrics = net.run_to_quiescence(limit)
    return _collect(net, procs, metrics, election_kinds={"elect"})


# --- Dolev-Klawe-Rodeh ----------------------------------------------------


class DKRNode(Process):
    """Active/relay formulation: each phase an active node learns the values
    of its two nearest active predecessors and survives, adopting the middle
    value, only if that value is a local maximum."""

    def __init__(self, node: int, successor: int, initiator: bool = True):
        super().__init__(node)
        self.successor = successor
        self.active = initiator
        self.value = node
        self.phase = 0
        self.sent_second = False
        self.buffer = {}
        self.leader = None
        self.phases = 0

    def _send(self, net, kind, phase, value):
        net.send(self.node, self.successor, Msg(kind, phase, value))

    def on_start(self, net):
        if self.active:
            self._send(net, "one", 0, self.value)

    def on_message(self, net, env):
        msg = env.payload
        if msg.kind == "leader":
            if self.leader is None:
                self.leader = msg.data
                self._send(net, "leader", None, msg.data)
            return
        if not self.active:
            self._send(net, msg.kind, msg.round, msg.data)
            return
        self.buffer[(msg.round, msg.kind)] = msg.data
        self._advance(net)

    def _advance(self, net):
        while self.active:
            first = self.buffer.get((self.phase, "one"))
            if first is None:
                return
            if first == self.value:
                self.phases = self.phase + 1
                self.leader = self.value
                self.active = False
                self._send(net, "leader", None, self.value)
                return
            if not self.sent_second:
                self.sent_second = True
                self._send(net, "two", self.phase, first)
            second = self.buffer.get((self.phase, "two"))
            if second is None:
                return
            del self.buffer[(self.phase, "one")], self.buffer[(self.phase, "two")]
            if first > max(self.value, second):
                self.value = first
                self.phase += 1
                self.sent_second = False
                self._send(net, "one", self.phase, self.value)
            else:
                self.active = False
                for (phase, kind) in sorted(self.buffer, key=lambda k: (k[0], k[1] != "one")):
                    self._send(net, kind, phase, self.buffer[(phase, kind)])
                self.buffer.clear()


def run_dkr(t: Topology, delay=None, seed: int = 0, limit: int = DEFAULT_LIMIT) -> ElectionResult:
    _require_ring(t, UNI, "Dolev-Klawe-Rodeh")
    net = Network(t, delay or Synchronous(1), seed=seed)
    procs = {v: DKRNode(v, t.successor(v)) for v in t.nodes}
    for p in procs.values():
        net.register(p)
    metrics = net.run_to_quiescence(limit)
    phases = max(p.phases for p in procs.values())
    return _collect(net, procs, metrics, election_kinds={"one", "two"}, phases=phases)


# --- Hirschberg-Sinclair --------------------------------------------------

CW, CCW = "cw", "ccw"


class HirschbergSinclairNode(Process):
    def __init__(self, node: int, successor: int, predecessor: int, initiator: bool = True):
        super().__init__(node)
        self.next = {CW: successor, CCW: predecessor}
        self.initiator = initiator
        self.phase = 0
        self.replies = 0
        self.leader = None

    def _send(self, net, direction, kind, data):
        net.send(self.node, self.next[direction], Msg(kind, data=(direction,) + data))

    def _probe(self, net):
        for direction in (CW, CCW):
            self._send(net, direction, "probe", (self.node, self.phase, 1))

    def on_start(self, net):
        if self.initiator:
            self._probe(net)

    def on_message(self, net, env):
        kind = env.kind
        direction, *rest = env.payload.data
        if kind == "probe":
            origin, phase, hops = rest
            if origin == self.node:
                if self.leader is None:
                    self.leader = self.node
                    self._send(net, CW, "leader", (self.node,))
            elif origin > self.node:
                if hops < 2**phase:
                    self._send(net, direction, "probe", (origin, phase, hops + 1))
                else:
                    back = CCW if direction == CW else CW
                    self._send(net, back, "reply", (origin, phase))
        elif kind == "reply":
            origin, phase = rest
            if origin != self.node:
                self._send(net, direction, "reply", (origin, phase))
            elif phase == self.phase:
                self.replies += 1
                if self.replies == 2 and self.leader is None:
                    self.phase += 1
                    self.replies = 0
                    self._probe(net)
        elif kind == "leader":
            (origin,) = rest
            if origin != self.node:
                self.leader = origin
                self._send(net, CW, "leader", (origin,))


def run_hirschberg_sinclair(t: Topology, delay=None, seed: int = 0, initiators=None,
                            limit: int = DEFAULT_LIMIT) -> ElectionResult:
    _require_ring(t, BI, "Hirschberg-Sinclair")
    net = Network(t, delay or Synchronous(1), seed=seed)
    starters = _initiator_set(t, initiators)
    procs = {v: HirschbergSinclairNode(v, t.successor(v), t.predecessor(v), v in starters)
             for v in t.nodes}
    for p in procs.values():
        net.register(p)
    metrics = net.run_to_quiescence(limit)
    return _collect(net, procs, metrics, election_kinds={"probe", "reply"})


# --- Itai-Rodeh -----------------------------------------------------------


class ItaiRodehNode(Process):
    """Anonymous ring member. The node index is used only to derive the
    node's private RNG stream and for trace bookkeeping."""

    def __init__(self, node: int, successor: int, n_known: int, rng: random.Random, initiator: bool = True):
        super().__init__(node)
        self.successor = successor
        self.n = n_known
        self.rng = rng
        self.active = initiator
        self.phase = 0
        self.draw = 0
        self.is_leader = False
        self.leader = None

    def _send(self, net, kind, data):
        net.send(self.node, self.successor, Msg(kind, data=data))

    def _new_phase(self, net):
        self.phase += 1
        self.draw = self.rng.randint(1, self.n)
        self._send(net, "token", (self.phase, self.draw, 1, True))

    def on_start(self, net):
        if self.active:
            self._new_phase(net)

    def on_message(self, net, env):
        if env.kind == "leader":
            hops, origin = env.payload.data
            if hops < self.n:
                self.leader = origin
                self._send(net, "leader", (hops + 1, origin))
            return
        phase, draw, hops, unique = env.payload.data
        if not self.active:
            self._send(net, "token", (phase, draw, hops + 1, unique))
            return
        if hops == self.n:
            if unique:
                self.active = False
                self.is_leader = True
                self.leader = self.node
                self._send(net, "leader", (1, self.node))
            else:
                self._new_phase(net)
        elif (phase, draw) == (self.phase, self.draw):
            self._send(net, "token", (phase, draw, hops + 1, False))
        elif (phase, draw) > (self.phase, self.draw):
            self.active = False
            self._send(net, "token", (phase, draw, hops + 1, unique))


def run_itai_rodeh(t: Topology, n_known: int, delay=None, seed: int = 0, initiators=None,
                   limit: int = DEFAULT_LIMIT) -> ElectionResult:
    """Randomized election on an anonymous ring whose size is known.

    Requires a synchronous delay model. ``result.phases`` is the winning
    phase number; ``result.leader`` is the winner's bookkeeping index.
    """
    if t.kind != "ring":
        raise TopologyMismatch(f"Itai-Rodeh needs a ring, got {t.kind}")
    delay = delay or Synchronous(1)
    if not isinstance(delay, Synchronous):
        raise ModelMismatch("Itai-Rodeh runs in synchronous rounds only")
    if n_known != t.node_count:
        raise ModelMismatch(f"known size {n_known} differs from ring size {t.node_count}")
    net = Network(t, delay, seed=seed)
    starters = _initiator_set(t, initiators)
    procs = {
        v: ItaiRodehNode(v, t.successor(v), n_known, random.Random(f"{seed}/itai-rodeh/{v}"), v in starters)
        for v in t.nodes
    }
    for p in procs.values():
        net.register(p)
    metrics = net.run_to_quiescence(limit)
    winners = [v for v, p in procs.items() if p.is_leader]
    result = _collect(net, procs, metrics, election_kinds={"token"},
                      phases=max((procs[v].phase for v in winners), default=None),
                      rounds=metrics.quiescent_time)
    result.winners = winners
    return result


# --- Bully ----------------------------------------------------------------


class BullyCore:
    """Bully election among ``members``, embeddable in any process.

    ``send(dst, kind)`` emits an ``election``/``ok``/``coordinator`` message,
    ``arm(tag, delay)`` starts a host timer and ``on_leader(leader)`` fires
    once a coordinator is known (including self). The host forwards
    incoming Bully messages to :meth:`receive` and the ``bully-ok`` /
    ``bully-coord`` timers to :meth:`timeout`.
    """

    def __init__(self, me: int, members: Iterable[int], ok_timeout: int, coord_timeout: int,
                 send: Callable, arm: Callable, on_leader: Callable):
        self.me = me
        self.members = sorted(set(members) | {me})
        self.ok_timeout = ok_timeout
        self.coord_timeout = coord_timeout
        self.send = send
        self.arm = arm
        self.on_leader = on_leader
        self.started = False
        self.got_ok = False
        self.leader = None

    def start(self):
        if self.started or self.leader is not None:
            return
        self.started = True
        self.got_ok = False
        higher = [m for m in self.members if m > self.me]
        if not higher:
            self._declare()
            return
        for m in higher:
            self.send(m, "election")
        self.arm("bully-ok", self.ok_timeout)

    def _declare(self):
        self.leader = self.me
        for m in self.members:
            if m != self.me:
                self.send(m, "coordinator")
        self.on_leader(self.me)

    def receive(self, kind: str, src: int):
        if kind == "election":
            self.send(src, "ok")
            self.start()
        elif kind == "ok":
            if self.leader is None and not self.got_ok:
                self.got_ok = True
                self.arm("bully-coord", self.coord_timeout)
        elif kind == "coordinator":
            if self.leader is None or src > self.leader:
                self.leader = src
                self.on_leader(src)

    def timeout(self, tag: str):
        if self.leader is not None:
            return
        if tag == "bully-ok" and not self.got_ok:
            self._declare()
        elif tag == "bully-coord":
            self.started = False
            self.start()


def sound_timeout(delay) -> int:
    """Smallest round-trip timeout that cannot misfire: 2*bound + 1."""
    return 2 * delay.nominal_bound + 1


class BullyNode(Process):
    def __init__(self, node: int, members, timeout: int, bound: int, initiator: bool):
        super().__init__(node)
        self.initiator = initiator
        self.leader = None
        self._net = None
        self.core = BullyCore(node, members, timeout, timeout + 2 * bound + 1,
                              self._send, self._arm, self._elected)

    def _send(self, dst, kind):
        self._net.send(self.node, dst, Msg(kind))

    def _arm(self, tag, delay):
        self.arm(self._net, tag, delay)

    def _elected(self, leader):
        self.leader = leader

    def on_start(self, net):
        self._net = net
        if self.initiator:
            self.core.start()

    def on_message(self, net, env):
        self.core.receive(env.kind, env.src)

    def on_timer(self, net, tag):
        self.core.timeout(tag)


def run_bully(t: Topology, initiators=(0,), faults: FaultPlan | None = None, delay=None,
              timeout: int | None = None, seed: int = 0, limit: int = DEFAULT_LIMIT) -> ElectionResult:
    """Bully election on a clique; the highest alive id should win."""
    if t.kind != "clique":
        raise TopologyMismatch(f"Bully needs a clique, got {t.kind}")
    delay = delay or Synchronous(1)
    minimum = sound_timeout(delay)
    if timeout is None:
        timeout = minimum
    elif isinstance(delay, (Synchronous, PartiallySynchronous)) and timeout < minimum:
        raise UnsoundTimeout(f"timeout {timeout} < 2*{delay.nominal_bound}+1")
    net = Network(t, delay, faults=faults, seed=seed)
    starters = set(initiators)
    procs = {v: BullyNode(v, t.nodes, timeout, delay.nominal_bound, v in starters) for v in t.nodes}
    for p in procs.values():
        net.register(p)
    metrics = net.run_to_quiescence(limit)
    return _collect(net, procs, metrics, election_kinds={"election", "ok"})


__all__ = [
    "BullyCore",
    "ElectionResult",
    "run_bully",
    "run_chang_roberts",
    "run_dkr",
    "run_hirschberg_sinclair",
    "run_itai_rodeh",
    "sound_timeout",
]
