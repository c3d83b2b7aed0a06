"""Randomized invariant checks."""

import math
import random

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from qelect.election_quantum import STEADY, QuantumElection, QuantumParams
from qelect.elections_classical import run_bully, run_chang_roberts, run_dkr, run_hirschberg_sinclair
from qelect.harness.scenario import run_scenario
from qelect.quantum_sim import GHZRegistry, assemble, digits_needed, snap_violations
from qelect.simnet import (
    Asynchronous,
    FaultPlan,
    MessageFilter,
    Msg,
    Network,
    PartiallySynchronous,
    Process,
    Synchronous,
    elapsed_causal_time,
)
from qelect.topology import build_clique, build_ring, diameter

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

sizes = st.integers(min_value=2, max_value=24)
seeds = st.integers(min_value=0, max_value=10**6)


@st.composite
def delay_models(draw):
    kind = draw(st.sampled_from(["sync", "psync", "async"]))
    bound = draw(st.integers(1, 5))
    if kind == "sync":
        return Synchronous(bound, draw(st.booleans()))
    if kind == "psync":
        return PartiallySynchronous(draw(st.integers(0, 40)), bound, draw(st.integers(1, 20)))
    return Asynchronous(bound, draw(st.sampled_from(["uniform", "geometric"])))


# --- topology ----------------------------------------------------------------


@FAST
@given(sizes, st.sampled_from(["uni", "bi"]), seeds)
def test_ring_shape(n, direction, seed):
    t = build_ring(n, direction, "random", seed=seed)
    assert set(t.nodes) == set(range(n)) == set(t.ring_order)
    assert t.is_connected()
    if direction == "uni":
        assert t.edge_count == n
        assert all(len(t.neighbors(v)) == 1 for v in t.nodes)
    else:
        assert t.edge_count == (n if n > 2 else 1)
        assert all(len(t.neighbors(v)) == (2 if n > 2 else 1) for v in t.nodes)
    assert diameter(t) == (n - 1 if direction == "uni" else n // 2)


@FAST
@given(st.integers(1, 30))
def test_clique_shape(n):
    t = build_clique(n)
    assert t.edge_count == n * (n - 1) // 2
    assert diameter(t) == (1 if n > 1 else 0)


# --- simnet ------------------------------------------------------------------


class Gossip(Process):
    def __init__(self, node, n, budget):
        super().__init__(node)
        self.n, self.budget = n, budget
        self.deliveries = []

    def on_start(self, net):
        net.send(self.node, (self.node + 1) % self.n, Msg("g"))

    def on_message(self, net, env):
        self.deliveries.append((net.now, env.msg_id))
        if self.budget > 0:
            self.budget -= 1
            for _ in range(net.rng.randint(0, 2)):
                dst = net.rng.randrange(self.n)
                if dst != self.node:
                    net.send(self.node, dst, Msg("g"))


def gossip_run(n, model, seed, crashes=(), omissions=()):
    plan = FaultPlan(list(crashes), list(omissions))
    net = Network(build_clique(n), model, faults=plan, seed=seed)
    procs = [Gossip(v, n, 15) for v in range(n)]
    for p in procs:
        net.register(p)
    return net, procs, net.run_to_quiescence(limit=20_000)


@FAST
@given(st.integers(2, 8), delay_models(), seeds)
def test_engine_invariants(n, model, seed):
    net, _, m = gossip_run(n, model, seed)
    trace = net.trace
    for e in trace:
        if e.delivered:
            assert e.deliver_time >= e.send_time + 1
            if isinstance(model, Synchronous):
                assert e.deliver_time - e.send_time <= model.bound
            if isinstance(model, PartiallySynchronous) and e.send_time >= model.gst:
                assert e.deliver_time - e.send_time <= model.bound
    assert m.messages_delivered <= m.total_sent
    assert m.time_complexity <= m.messages_delivered
    assert elapsed_causal_time(trace, lambda e: True) == m.time_complexity
    for e in trace:
        before = [x.causal_depth for x in trace
                  if x.delivered and x.dst == e.src and x.deliver_step <= e.send_step]
        assert all(e.causal_depth > d for d in before)


@FAST
@given(st.integers(2, 8), delay_models(), seeds)
def test_replay_is_identical(n, model, seed):
    a, _, ma = gossip_run(n, model, seed)
    b, _, mb = gossip_run(n, model, seed)
    assert [e.to_json() for e in a.trace] == [e.to_json() for e in b.trace]
    assert ma == mb


@FAST
@given(st.integers(3, 8), seeds, st.data())
def test_crashed_nodes_are_silent(n, seed, data):
    victims = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n - 1))
    crashes = [(v, data.draw(st.integers(0, 20))) for v in victims]
    net, procs, _ = gossip_run(n, Synchronous(3), seed, crashes=crashes)
    at = dict(crashes)
    for e in net.trace:
        if e.src in at:
            assert e.send_time < at[e.src]
    for v, t in at.items():
        assert all(time < t for time, _ in procs[v].deliveries)


@FAST
@given(st.integers(2, 6), seeds, st.integers(0, 5))
def test_stalled_messages_never_arrive(n, seed, target):
    target %= n
    model = Asynchronous(3, stall=MessageFilter(dst=frozenset({target})))
    net, procs, _ = gossip_run(n, model, seed)
    assert procs[target].deliveries == []
    assert all(e.deliver_time == math.inf for e in net.trace if e.dst == target)


# --- GHZ registry ------------------------------------------------------------


@FAST
@given(st.integers(2, 40), st.integers(2, 9), seeds, st.randoms(use_true_random=False))
def test_snap_consistency_any_order(n, d, seed, rnd):
    reg = GHZRegistry(seed)
    states, handles = reg.prepare_ghz_set(range(n), n, d, epoch=0)
    assert len(states) == digits_needed(n, d)
    flat = [h for hs in handles.values() for h in hs]
    assert all(0 <= h.sequence_index < len(states) for h in flat)
    assert len({(h.state_id, h.holder) for h in flat}) == len(flat)
    rnd.shuffle(flat)
    first = {}
    for h in flat:
        m = reg.measure(h, now=0)
        assert first.setdefault(m.state_id, m.digit) == m.digit
    assert snap_violations(reg.measurements) == []
    assert all(st_.outcome == first[st_.state_id] for st_ in states)


@FAST
@given(st.integers(2, 12), seeds)
def test_revoked_states_only_give_noise(n, seed):
    reg = GHZRegistry(seed)
    _, handles = reg.prepare_ghz_set(range(n), n, 2, epoch=3)
    reg.revoke_epoch(3)
    assert all(reg.measure(h, 0).decohered for hs in handles.values() for h in hs)


@FAST
@given(st.integers(2, 10), st.integers(0, 10**6))
def test_assemble_inverts_radix_digits(d, value):
    digits = []
    v = value
    while True:
        digits.append(v % d)
        v //= d
        if v == 0:
            break
    assert assemble(reversed(digits), d) == value


# --- classical elections -------------------------------------------------------


@FAST
@given(st.permutations(list(range(9))), seeds, st.integers(1, 4))
def test_ring_protocols_elect_the_maximum(order, seed, bound):
    n = len(order)
    for runner, direction in ((run_chang_roberts, "uni"), (run_dkr, "uni"), (run_hirschberg_sinclair, "bi")):
        res = runner(build_ring(n, direction, list(order)), Synchronous(bound), seed)
        assert res.metrics.terminated and res.agreement
        assert res.leader == n - 1
        assert set(res.views.values()) == {n - 1}


@FAST
@given(st.integers(2, 12), seeds, st.data())
def test_bully_elects_highest_alive(n, seed, data):
    down = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n - 1))
    alive = [v for v in range(n) if v not in down]
    starters = data.draw(st.lists(st.sampled_from(alive), min_size=1, unique=True))
    res = run_bully(build_clique(n), initiators=starters, faults=FaultPlan([(v, 0) for v in down]),
                    delay=Synchronous(data.draw(st.integers(1, 4))), seed=seed)
    assert res.agreement and res.leader == max(alive)


# --- quantum election ----------------------------------------------------------


def watch_keys(q):
    """Record the key sequence each node adopts."""
    seen = {v: [] for v in q.nodes}
    original = q._adopted

    def hook(node, key, old, received):
        seen[node.node].append(key)
        original(node, key, old, received)

    q._adopted = hook
    return seen


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(2, 4), st.integers(0, 3), seeds, st.data())
def test_quantum_safety_and_liveness(n, d, f, seed, data):
    f = min(f, n - 2)
    q = QuantumElection(QuantumParams(n=n, d=d, f=f, bound=3), Synchronous(3), seed=seed)
    seen = watch_keys(q)
    q.start()
    rng = random.Random(seed)
    budget = f
    for _ in range(3):
        crashes = []
        if budget and data.draw(st.booleans()):
            crashes = rng.sample(q.net.alive_nodes(), 1)
            budget -= 1
        rep = q.election_round(crashes=crashes, limit=200_000)
        assert rep.terminated
        assert rep.leader is not None and q.net.alive(rep.leader)
        for v in q.net.alive_nodes():
            node = q.nodes[v]
            assert node.phase == STEADY and node.leader == rep.leader
            assert len(node.shares) == q.params.digits
            assert all(not h.consumed and h.epoch == node.key.epoch for h in node.shares)
    assert all(len(leaders) == 1 for leaders in q.leaders_by_key.values())
    assert all(a < b for keys in seen.values() for a, b in zip(keys, keys[1:]))
    assert q.snap_violations() == []


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["quantum", "chang-roberts", "bully", "dkr"]), st.integers(3, 10), seeds)
def test_reports_are_reproducible(protocol, n, seed):
    topo = {"kind": "clique", "n": n} if protocol in ("quantum", "bully") else \
        {"kind": "ring", "n": n, "id_order": "random"}
    cfg = {"protocol": protocol, "topology": topo, "seed": seed}
    a, b = run_scenario(dict(cfg)), run_scenario(dict(cfg))
    assert a.csv() == b.csv() and a.jsonl() == b.jsonl()
