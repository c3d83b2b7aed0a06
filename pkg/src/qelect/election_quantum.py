"""GHZ-assisted leader election.

After a one-off classical bootstrap, the leader prepares ``ceil(log_d n)``
GHZ states and ships one share of each to every node over the quantum
channel. A later election is a single classical broadcast of a trigger
``m_E``: each node measures its shares in sequence order, reads the digits
as a radix-d number ``B``, and the node whose id equals ``B`` becomes the
leader-elect. Everyone else acknowledges it and goes leaderless until the
leader-elect has collected the acks and shipped the next share set.

With a fault bound ``f`` the nodes of the window ``B, B+1, ..., B+f``
(taken modulo ``n`` for ``B < n``) fall back to a Bully election among
themselves when node ``B`` stops answering; when no window member is alive
or ``B`` is not a valid id, every node falls back to a full Bully.

Elections are serialized by an epoch counter. Share sets are ordered by
``EpochKey(epoch, rank, leader)`` and a node adopts a share set only if its
key is larger than the one it holds, so a stale or duplicated election can
never install two leaders for the same key.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from .elections_classical import (
    BullyCore,
    ElectionResult,
    run_bully,
    run_chang_roberts,
    run_dkr,
    run_hirschberg_sinclair,
)
from .errors import BootstrapFailed, TopologyMismatch
from .quantum_sim import GHZRegistry, assemble, digits_needed, snap_violations
from .simnet import CLASSICAL, QUANTUM, FaultPlan, Msg, Network, Process, elapsed_causal_time
from .topology import Topology, build_clique

BOOTSTRAPPING = "Bootstrapping"
PREPARING = "PreparingShares"
STEADY = "Steady"
MEASURING = "Measuring"
AWAITING_ACKS = "AwaitingAcks"
AWAITING_SHARES = "AwaitingShares"
FALLBACK = "FallbackBully"

NORMAL, WINDOW, FULL = 0, 1, 2

ROUND_KINDS = frozenset({"trigger", "ack", "shares"})
CONTROL_KINDS = frozenset({"heartbeat"})


class EpochKey(NamedTuple):
    epoch: int
    rank: int
    leader: int

    def to_json(self):
        return list(self)


@dataclass
class ElectionEpoch:
    epoch: int
    leader_of_record: int | None
    state_set_ref: list = field(default_factory=list)


@dataclass(frozen=True)
class QuantumParams:
    """Protocol knobs. ``bound`` is the delay bound the timeouts assume."""

    n: int
    d: int = 2
    f: int = 0
    ttl: float = math.inf
    heartbeat: int | None = None
    bound: int = 1
    window_always: bool = False

    @property
    def round_trip(self) -> int:
        return 2 * self.bound + 1

    @property
    def ack_wait(self) -> int:
        return 2 * self.bound + 1

    @property
    def window_wait(self) -> int:
        # leader-elect's ack wait plus one probe round trip, then delivery
        return 6 * self.bound + 2

    @property
    def outside_wait(self) -> int:
        # long enough for a window fallback to finish and ship shares
        return self.window_wait + 3 * self.round_trip + 2 * self.bound

    @property
    def suspicion(self) -> int | None:
        if self.heartbeat is None:
            return None
        return 2 * self.bound + self.heartbeat

    @property
    def digits(self) -> int:
        return digits_needed(self.n, self.d)


def fallback_window(b: int, f: int, n: int) -> list:
    """Ids that may run the window Bully for measured value ``b``.

    For a valid id the window wraps around modulo ``n`` so it always holds
    ``min(f+1, n)`` distinct ids; an out-of-range ``b`` yields the clamped
    (and therefore empty) window.
    """
    if b >= n:
        return [x for x in range(b, b + f + 1) if x < n]
    return sorted({(b + i) % n for i in range(f + 1)})


class QNode(Process):
    def __init__(self, node: int, system: "QuantumElection"):
        super().__init__(node)
        self.sys = system
        self.p = system.params
        self.phase = BOOTSTRAPPING
        self.key = None
        self.shares = None
        self.leader = None
        self.last_leader = None
        self.done_rounds = set()
        self.pending_triggers = set()
        self.round = None
        self.b = None
        self.window = []
        self.acks = defaultdict(set)
        self.expected = set()
        self.suspected = set()
        self.probing = set()
        self.pongs = set()
        self.watch = set()
        self.bully = None
        self.bully_ctx = None

    # -- helpers ---------------------------------------------------------

    @property
    def others(self):
        return [v for v in range(self.p.n) if v != self.node]

    def _set_phase(self, net, phase):
        if phase != self.phase:
            self.phase = phase
            net.record("phase", node=self.node, phase=phase,
                       epoch=None if self.key is None else self.key.epoch)

    def _send(self, net, dst, kind, rnd, data=None, channel=CLASSICAL):
        net.send(self.node, dst, Msg(kind, rnd, data), channel)

    # -- bootstrap & preparation ------------------------------------------

    def on_start(self, net):
        boot = self.sys.bootstrap_leader
        self.leader = self.last_leader = boot
        if boot == self.node:
            self.prepare_round(net, epoch=0, rank=NORMAL, rnd=-1)
        else:
            self._await_shares(net, {boot}, self.p.outside_wait, rnd=-1)

    def prepare_round(self, net, epoch: int, rank: int, rnd: int):
        """Prepare a fresh share set, ship it to every other node, adopt it."""
        self._set_phase(net, PREPARING)
        key = EpochKey(epoch, rank, self.node)
        states, handles = self.sys.registry.prepare_ghz_set(
            range(self.p.n), self.p.n, self.p.d, epoch, self.p.ttl, net.now)
        if rank == NORMAL:
            # every live node has acked, so nobody still needs the older sets;
            # after a fallback some nodes may not have measured yet
            self.sys.revoke_before(epoch)
        for dst in self.others:
            self._send(net, dst, "shares", rnd, (key, handles[dst]), QUANTUM)
        self._adopt(net, key, handles[self.node], received=False)

    def _adopt(self, net, key, handles, received=True) -> bool:
        if self.key is not None and key <= self.key:
            return False
        old = self.last_leader
        self.key = key
        self.shares = sorted(handles, key=lambda h: h.sequence_index)
        self.leader = self.last_leader = key.leader
        self.disarm_all()
        self.bully = self.bully_ctx = None
        self.expected = set()
        self.watch = set()
        self._set_phase(net, STEADY)
        self.sys._adopted(self, key, old, received)
        if self.p.heartbeat is not None:
            if key.leader == self.node:
                self.arm(net, "heartbeat", self.p.heartbeat)
            else:
                self.arm(net, "suspect", self.p.suspicion)
        self.pending_triggers = {e for e in self.pending_triggers if e >= key.epoch}
        if key.epoch in self.done_rounds:
            # a rival set for a round already triggered here: measure it too
            self.done_rounds.discard(key.epoch)
            self.pending_triggers.discard(key.epoch)
            self.measure_and_resolve(net, key.epoch)
        elif key.epoch in self.pending_triggers:
            self.pending_triggers.discard(key.epoch)
            self._on_trigger(net, key.epoch)
        return True

    # -- election ----------------------------------------------------------

    def trigger(self, net) -> bool:
        """Broadcast ``m_E`` for the current epoch; False if not in Steady."""
        if self.phase != STEADY or self.key is None or self.key.epoch in self.done_rounds:
            return False
        e = self.key.epoch
        net.record("trigger", node=self.node, epoch=e)
        for dst in self.others:
            self._send(net, dst, "trigger", e)
        self._on_trigger(net, e)
        return True

    def _on_trigger(self, net, e):
        if self.key is None or e > self.key.epoch:
            self.pending_triggers.add(e)
            return
        if e < self.key.epoch or e in self.done_rounds or self.phase != STEADY:
            net.record("stale-trigger", node=self.node, epoch=e)
            return
        self.measure_and_resolve(net, e)

    def measure_and_resolve(self, net, e):
        self.done_rounds.add(e)
        self.disarm("heartbeat")
        self.disarm("suspect")
        self._set_phase(net, MEASURING)
        ms = [self.sys.registry.measure(h, net.now) for h in self.shares]
        self.shares = None
        b = assemble([m.digit for m in ms], self.p.d)
        unreliable = any(m.decohered for m in ms)
        self.round, self.b = e, b
        self.leader = None
        net.record("resolve", node=self.node, round=e, B=b, unreliable=unreliable)
        self.resolve_leader(net, e, b, unreliable)

    def resolve_leader(self, net, e, b, unreliable=False):
        p = self.p
        self.window = [] if unreliable else fallback_window(b, p.f, p.n)
        if not self.window:
            self.start_fallback(net, e, FULL, 0, [v for v in range(p.n) if v not in self.suspected])
            return
        if p.window_always and p.f > 0:
            if self.node in self.window:
                self.start_fallback(net, e, WINDOW, 0, self.window)
            else:
                self._await_shares(net, set(self.window), p.outside_wait, e)
            return
        if self.node == b:
            self._set_phase(net, AWAITING_ACKS)
            self.expected = set(self.others) - self.suspected
            self.arm(net, "ack", p.ack_wait)
            self._check_acks(net)
            return
        self._send(net, b, "ack", e)
        if self.node in self.window:
            self._await_shares(net, {b}, p.window_wait, e)
        else:
            self._await_shares(net, set(self.window), p.outside_wait, e)

    def _check_acks(self, net):
        if self.phase == AWAITING_ACKS and self.expected <= self.acks[self.round]:
            self.handover(net)

    def handover(self, net):
        e = self.round
        self.acks.pop(e, None)
        self.prepare_round(net, epoch=e + 1, rank=NORMAL, rnd=e)

    def _await_shares(self, net, watch, wait, rnd):
        self._set_phase(net, AWAITING_SHARES)
        self.leader = None if rnd >= 0 else self.leader
        self.round = rnd
        self.watch = set(watch) - {self.node}
        self._wait = wait
        self.arm(net, "wait", wait)

    def _probe(self, net, targets, tag):
        self.pongs = set()
        self.probing = set(targets)
        for v in sorted(self.probing):
            self._send(net, v, "ping", self.round)
        self.arm(net, tag, self.p.round_trip)

    # -- fallback ------------------------------------------------------------

    def start_fallback(self, net, e, scope, attempt, members):
        ctx = (attempt, scope)
        if self.bully_ctx is not None and self.bully_ctx >= ctx:
            return
        self.done_rounds.add(e)
        self.round = e
        self.disarm_all()
        self.bully_ctx = ctx
        self.leader = None
        self._set_phase(net, FALLBACK)
        members = sorted(set(members) | {self.node})
        data = (scope, attempt, tuple(members))

        def send(dst, kind):
            self._send(net, dst, "bully-" + kind, e, data)

        def arm(tag, delay):
            self.arm(net, tag, delay)

        def elected(leader):
            if self.bully_ctx != ctx:
                return
            if leader == self.node:
                rank = WINDOW if scope == WINDOW else FULL + attempt
                epoch = (self.key.epoch if self.key else -1) + 1
                self.prepare_round(net, epoch=max(epoch, e + 1), rank=rank, rnd=e)
            else:
                self._await_shares(net, {leader}, self.p.outside_wait, e)
                self.bully_ctx = ctx

        self.bully = BullyCore(self.node, members, self.p.round_trip,
                               self.p.round_trip + 2 * self.p.bound + 1, send, arm, elected)
        net.record("fallback", node=self.node, round=e, scope=scope, attempt=attempt,
                   members=members)
        self.bully.start()

    def _on_bully(self, net, env):
        e = env.round
        scope, attempt, members = env.payload.data
        if self.key is not None and self.key.epoch > e:
            return
        ctx = (attempt, scope)
        if self.bully_ctx is None or ctx > self.bully_ctx:
            if env.kind == "bully-election":
                self.start_fallback(net, e, scope, attempt, members)
            else:
                return
        if ctx == self.bully_ctx and self.bully is not None:
            self.bully.receive(env.kind[len("bully-"):], env.src)

    # -- dispatch ------------------------------------------------------------

    def on_message(self, net, env):
        kind = env.kind
        if kind == "shares":
            key, handles = env.payload.data
            if not self._adopt(net, key, handles):
                net.record("stale-shares", node=self.node, key=list(key))
        elif kind == "trigger":
            self._on_trigger(net, env.round)
        elif kind == "ack":
            self.acks[env.round].add(env.src)
            if self.round == env.round:
                self._check_acks(net)
        elif kind == "ping":
            self._send(net, env.src, "pong", env.round)
        elif kind == "pong":
            self.pongs.add(env.src)
        elif kind == "heartbeat":
            if (self.phase == STEADY and env.src == self.leader
                    and self.key is not None and env.round == self.key.epoch):
                self.arm(net, "suspect", self.p.suspicion)
        elif kind.startswith("bully-"):
            self._on_bully(net, env)

    def on_timer(self, net, tag):
        p = self.p
        if tag == "heartbeat":
            if self.phase == STEADY and self.leader == self.node:
                for dst in self.others:
                    self._send(net, dst, "heartbeat", self.key.epoch)
                self.arm(net, "heartbeat", p.heartbeat)
        elif tag == "suspect":
            if self.phase == STEADY:
                net.record("suspect", node=self.node, leader=self.leader)
                self.suspected.add(self.leader)
                self.trigger(net)
        elif tag == "ack":
            missing = self.expected - self.acks[self.round]
            if not missing:
                self._check_acks(net)
            else:
                self._probe(net, missing, "ack-probe")
        elif tag == "ack-probe":
            dead = self.probing - self.pongs - self.acks[self.round]
            self.suspected |= dead
            self.expected -= dead
            if self.expected <= self.acks[self.round]:
                self.handover(net)
            else:
                self.arm(net, "ack", p.ack_wait)
        elif tag == "wait":
            self._probe(net, self.watch, "wait-probe")
        elif tag == "wait-probe":
            if self.pongs & self.watch:
                self.arm(net, "wait", self._wait)
                return
            self.suspected |= self.watch
            e = self.round
            in_window = self.node in self.window and self.bully_ctx is None and e >= 0
            if in_window and not p.window_always and self.watch == {self.b}:
                members = [v for v in self.window if v not in self.suspected]
                self.start_fallback(net, e, WINDOW, 0, members)
            else:
                attempt = 0 if self.bully_ctx is None else self.bully_ctx[0] + 1
                members = [v for v in range(p.n) if v not in self.suspected]
                self.start_fallback(net, e, FULL, attempt, members)
        elif tag.startswith("bully-") and self.bully is not None:
            self.bully.timeout(tag)


class QuantumElection:
    """One simulated system running the GHZ election on a logical clique."""

    def __init__(self, params: QuantumParams, delay, seed: int = 0,
                 bootstrap_leader: int | None = None, faults: FaultPlan | None = None,
                 record_events: bool = True):
        self.params = params
        self.topology = build_clique(params.n)
        self.net = Network(self.topology, delay, faults=faults, seed=seed,
                           record_events=record_events)
        self.seed = seed
        self.registry = GHZRegistry(seed, sink=self.net.record if record_events else None)
        self.bootstrap_leader = params.n - 1 if bootstrap_leader is None else bootstrap_leader
        self.nodes = {v: QNode(v, self) for v in range(params.n)}
        for node in self.nodes.values():
            self.net.register(node)
        self.changes = []
        self.leaders_by_key = defaultdict(set)
        self.rounds = []
        self._dirty = True
        self._picker = random.Random(f"{seed}/initiator")
        self._revoked_upto = 0

    def revoke_before(self, epoch: int) -> None:
        for e in range(self._revoked_upto, epoch):
            self.registry.revoke_epoch(e)
        self._revoked_upto = max(self._revoked_upto, epoch)

    # -- observation -----------------------------------------------------

    def _adopted(self, node, key, old, received):
        self._dirty = True
        self.leaders_by_key[key].add(key.leader)
        if received and key.leader != old:
            self.changes.append((self.net.now, node.node, old, key.leader))

    def settled(self) -> bool:
        if not self._dirty:
            return False
        self._dirty = False
        keys = set()
        for v in self.net.alive_nodes():
            nd = self.nodes[v]
            if nd.phase != STEADY:
                return False
            keys.add(nd.key)
        return len(keys) == 1

    @property
    def epoch(self) -> int | None:
        keys = {self.nodes[v].key for v in self.net.alive_nodes()}
        return max(k.epoch for k in keys if k is not None) if keys - {None} else None

    def views(self) -> dict:
        return {v: self.nodes[v].leader for v in self.net.alive_nodes()}

    def agreed_leader(self):
        believed = set(self.views().values())
        if len(believed) == 1:
            return believed.pop()
        return None

    def predicted_b(self) -> int:
        """Value the current share set will measure to (peeked, not sampled)."""
        for v in self.net.alive_nodes():
            shares = self.nodes[v].shares
            if shares:
                digits = [self.registry.peek_outcome(h.state_id) for h in shares]
                return assemble(digits, self.params.d)
        raise RuntimeError("no live node holds shares")

    def snap_violations(self) -> list:
        return snap_violations(self.registry.measurements)

    # -- driving ---------------------------------------------------------

    def run(self, limit: int = 10**6):
        """Run until the current share set is held by every live node."""
        return self.net.run_to_quiescence(limit, stop=self.settled)

    def start(self, limit: int = 10**6):
        metrics = self.run(limit)
        return metrics

    def election_round(self, initiator: int | None = None, crashes=(), limit: int = 10**6):
        """Trigger one election and run until it settles (or ``limit``).

        ``crashes`` lists nodes to crash at the trigger instant.
        """
        net = self.net
        start_events = net.step
        start_log = len(net.log)
        e = self.epoch
        t0 = net.now + 1
        for v in crashes:
            net.inject_crash(v, t0)
        alive = [v for v in net.alive_nodes() if net.alive(v, t0)]
        if initiator is None:
            initiator = self._picker.choice(alive)
        changes_before = len(self.changes)
        predicted = self.predicted_b()
        net.call_at(t0, initiator, self.nodes[initiator].trigger)
        self._dirty = False
        metrics = net.run_to_quiescence(limit, stop=self.settled)
        envs = [r for r in net.log[start_log:] if not isinstance(r, dict)]
        envs = [x for x in envs if x.round == e and x.kind not in CONTROL_KINDS]
        by_kind = defaultdict(int)
        for x in envs:
            by_kind[x.kind] += 1
        report = RoundReport(
            round=e,
            initiator=initiator,
            b=predicted,
            crashed=list(crashes),
            leader=self.agreed_leader() if metrics.terminated else None,
            messages=len(envs),
            by_kind=dict(sorted(by_kind.items())),
            causal_time=elapsed_causal_time(envs, select=lambda x: True),
            events=net.step - start_events,
            terminated=metrics.terminated,
            leader_changes=len(self.changes) - changes_before,
        )
        self.rounds.append(report)
        return report


@dataclass
class RoundReport:
    round: int
    initiator: int
    b: int
    crashed: list
    leader: int | None
    messages: int
    by_kind: dict
    causal_time: int
    events: int
    terminated: bool
    leader_changes: int

    def to_json(self):
        return dict(self.__dict__)


_BOOTSTRAP = {
    "bully": lambda t, delay, seed, limit: run_bully(t, initiators=t.nodes, delay=delay, seed=seed, limit=limit),
    "hs": lambda t, delay, seed, limit: run_hirschberg_sinclair(t, delay, seed, limit=limit),
    "hirschberg-sinclair": lambda t, delay, seed, limit: run_hirschberg_sinclair(t, delay, seed, limit=limit),
    "chang-roberts": lambda t, delay, seed, limit: run_chang_roberts(t, delay, seed, limit=limit),
    "dkr": lambda t, delay, seed, limit: run_dkr(t, delay, seed, limit=limit),
}


def bootstrap(t: Topology, delay, seed: int = 0, protocol: str = "bully",
              limit: int = 10**6) -> tuple[ElectionEpoch, ElectionResult]:
    """One-off classical election establishing epoch 0."""
    if t.anonymous:
        raise TopologyMismatch("bootstrap needs node identifiers")
    try:
        runner = _BOOTSTRAP[protocol]
    except KeyError:
        raise ValueError(f"unknown bootstrap protocol {protocol!r}") from None
    result = runner(t, delay, seed, limit)
    if not result.metrics.terminated or result.leader is None or not result.agreement:
        raise BootstrapFailed(f"{protocol} did not establish an agreed leader: {result.views}")
    return ElectionEpoch(0, result.leader), result
