from collections import Counter

import pytest
from scipy.stats import chisquare

from qelect.errors import AlreadyMeasured, InvalidDimension, InvalidParties, NoSuchShare
from qelect.quantum_sim import GHZRegistry, ShareHandle, assemble, digits_needed, snap_violations


@pytest.mark.parametrize("n,d,m", [(8, 2, 3), (8, 8, 1), (10, 3, 3), (2, 2, 1), (9, 3, 2), (64, 2, 6), (65, 2, 7)])
def test_digit_count(n, d, m):
    assert digits_needed(n, d) == m
    assert d ** m >= n > d ** (m - 1) or (m == 1 and n <= d)


def test_prepare_shapes():
    reg = GHZRegistry(seed=1)
    states, handles = reg.prepare_ghz_set(range(8), 8, 2, epoch=0)
    assert len(states) == 3
    assert set(handles) == set(range(8))
    assert all([h.sequence_index for h in hs] == [0, 1, 2] for hs in handles.values())


def test_every_holder_reads_the_same_digits():
    reg = GHZRegistry(seed=5)
    states, handles = reg.prepare_ghz_set(range(6), 6, 3, epoch=0)
    reads = {v: [reg.measure(h, now=1).digit for h in hs] for v, hs in handles.items()}
    assert len({tuple(r) for r in reads.values()}) == 1
    assert snap_violations(reg.measurements) == []


def test_outcome_independent_of_measurement_order():
    def read(order):
        reg = GHZRegistry(seed=11)
        _, handles = reg.prepare_ghz_set(range(4), 4, 2, epoch=0)
        out = {}
        for v in order:
            out[v] = tuple(reg.measure(h, 0).digit for h in handles[v])
        return out

    a = read([0, 1, 2, 3])
    b = read([3, 1, 0, 2])
    assert a == b


def test_peek_matches_measurement():
    reg = GHZRegistry(seed=2)
    states, handles = reg.prepare_ghz_set(range(3), 3, 5, epoch=0)
    peeked = [reg.peek_outcome(s.state_id) for s in states]
    assert [reg.measure(h, 0).digit for h in handles[1]] == peeked


@pytest.mark.parametrize("d", [2, 3, 8])
def test_outcomes_are_uniform(d):
    reg = GHZRegistry(seed=d)
    counts = Counter()
    for epoch in range(10_000):
        states, handles = reg.prepare_ghz_set(range(2), 2, d, epoch)
        counts[reg.measure(handles[0][0], 0).digit] += 1
    observed = [counts[k] for k in range(d)]
    assert chisquare(observed).pvalue > 0.001
    if d == 2:
        assert abs(counts[1] / 10_000 - 0.5) <= 0.02


def test_revoke_counts_then_zero():
    reg = GHZRegistry()
    reg.prepare_ghz_set(range(8), 8, 2, epoch=4)
    assert reg.revoke_epoch(4) == 3
    assert reg.revoke_epoch(4) == 0
    assert reg.revoke_epoch(99) == 0


def test_measuring_revoked_state_gives_flagged_noise():
    reg = GHZRegistry(seed=3)
    _, handles = reg.prepare_ghz_set(range(4), 4, 2, epoch=0)
    reg.revoke_epoch(0)
    ms = [reg.measure(h, 0) for hs in handles.values() for h in hs]
    assert all(m.decohered for m in ms)
    assert snap_violations(ms) == []


def test_measurement_after_ttl_decoheres():
    reg = GHZRegistry(seed=3)
    _, handles = reg.prepare_ghz_set(range(4), 4, 2, epoch=0, ttl=10, now=5)
    assert not reg.measure(handles[0][0], now=15).decohered
    assert reg.measure(handles[1][0], now=16).decohered


def test_double_measure_rejected():
    reg = GHZRegistry()
    _, handles = reg.prepare_ghz_set(range(2), 2, 2, epoch=0)
    reg.measure(handles[0][0], 0)
    with pytest.raises(AlreadyMeasured):
        reg.measure(handles[0][0], 0)


def test_unknown_share_rejected():
    reg = GHZRegistry()
    with pytest.raises(NoSuchShare):
        reg.measure(ShareHandle(state_id=42, holder=0, sequence_index=0, epoch=0), 0)


def test_bad_dimension_and_parties():
    reg = GHZRegistry()
    with pytest.raises(InvalidDimension):
        reg.prepare_ghz_set(range(4), 4, 1, epoch=0)
    with pytest.raises(InvalidParties):
        reg.prepare_ghz_set([], 0, 2, epoch=0)
    with pytest.raises(InvalidParties):
        reg.prepare_ghz_set(range(3), 4, 2, epoch=0)


def test_two_party_set():
    reg = GHZRegistry()
    states, handles = reg.prepare_ghz_set([0, 1], 2, 2, epoch=0)
    assert len(states) == 1 and len(handles[0]) == 1


@pytest.mark.parametrize("digits,d,value", [((1, 0, 1), 2, 5), ((2, 1, 0), 3, 21), ((0,), 2, 0), ((7,), 8, 7)])
def test_assemble(digits, d, value):
    assert assemble(digits, d) == value


def test_snap_violation_detected():
    from qelect.quantum_sim import Measurement
    ms = [Measurement(0, 0, 1, False, 0), Measurement(0, 1, 0, False, 0), Measurement(1, 0, 0, True, 0)]
    assert snap_violations(ms) == [0]


def test_lifecycle_records():
    events = []
    reg = GHZRegistry(seed=0, sink=lambda ev, **kw: events.append(ev))
    _, handles = reg.prepare_ghz_set(range(2), 2, 2, epoch=0)
    reg.measure(handles[0][0], 0)
    reg.revoke_epoch(0)
    reg.measure(handles[1][0], 0)
    assert events == ["prepared", "measured", "revoked", "decohered"]
