"""Classical stand-in for multiparty GHZ resources.

A d-level GHZ state measured in the computational basis gives every party
the same uniformly random digit. That shared digit is all the election
protocol consumes, so a state is stored as one lazily drawn integer instead
of a state vector. The draw is keyed by ``(seed, state_id)``: the order in
which parties measure can never change the outcome.

After its coherence deadline, or once its epoch is revoked, a state stops
correlating: each measurement then returns an independent digit and is
flagged ``decohered``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import AlreadyMeasured, InvalidDimension, InvalidParties, NoSuchShare


def digits_needed(n: int, d: int) -> int:
    """Smallest m with d**m >= n, computed in integers (ceil(log_d n))."""
    if d < 2:
        raise InvalidDimension(f"dimension must be >= 2, got {d}")
    m, cap = 0, 1
    while cap < n:
        cap *= d
        m += 1
    return m


@dataclass
class EntangledState:
    state_id: int
    dimension: int
    parties: frozenset
    epoch: int
    coherence_deadline: float = math.inf
    outcome: int | None = None
    revoked: bool = False

    def coherent(self, now: int) -> bool:
        return not self.revoked and now <= self.coherence_deadline


@dataclass
class ShareHandle:
    state_id: int
    holder: int
    sequence_index: int
    epoch: int
    consumed: bool = field(default=False, compare=False)

    def to_json(self):
        return {"state_id": self.state_id, "holder": self.holder,
                "index": self.sequence_index, "epoch": self.epoch}


@dataclass(frozen=True)
class Measurement:
    state_id: int
    holder: int
    digit: int
    decohered: bool
    time: int


class GHZRegistry:
    """Owns every entangled state of one run.

    ``sink`` (optional) receives lifecycle records as ``sink(event, **fields)``;
    the network's ``record`` method fits.
    """

    def __init__(self, seed: int = 0, sink: Callable | None = None):
        self.seed = seed
        self.sink = sink
        self.states = {}
        self._by_epoch = {}
        self.measurements = []
        self._handles = {}
        self._next_id = 0
        self._noise_calls = 0

    def _emit(self, event, **fields):
        if self.sink is not None:
            self.sink(event, **fields)

    def _outcome_rng(self, state_id: int) -> random.Random:
        return random.Random(f"{self.seed}/ghz/{state_id}")

    def peek_outcome(self, state_id: int) -> int:
        """Digit the state will yield when coherent, without sampling it."""
        st = self.states[state_id]
        if st.outcome is not None:
            return st.outcome
        return self._outcome_rng(state_id).randrange(st.dimension)

    def prepare_ghz_set(
        self,
        parties: Iterable[int],
        n: int,
        d: int,
        epoch: int,
        ttl: float = math.inf,
        now: int = 0,
    ):
        """Create ``ceil(log_d n)`` states over ``parties``.

        Returns ``(states, handles)`` where ``handles`` maps each party to its
        shares ordered by sequence index.
        """
        if d < 2:
            raise InvalidDimension(f"dimension must be >= 2, got {d}")
        parties = frozenset(parties)
        if not parties:
            raise InvalidParties("party set is empty")
        if len(parties) != n or n < 2:
            raise InvalidParties(f"expected {n} >= 2 parties, got {len(parties)}")
        deadline = now + ttl
        states = []
        for _ in range(digits_needed(n, d)):
            st = EntangledState(self._next_id, d, parties, epoch, deadline)
            self._next_id += 1
            self.states[st.state_id] = st
            self._by_epoch.setdefault(epoch, []).append(st)
            states.append(st)
        handles = {}
        for p in sorted(parties):
            hs = [ShareHandle(st.state_id, p, i, epoch) for i, st in enumerate(states)]
            for h in hs:
                self._handles[(h.state_id, p)] = h
            handles[p] = hs
        self._emit("prepared", epoch=epoch, states=[s.state_id for s in states],
                   dimension=d, deadline=None if deadline == math.inf else deadline)
        return states, handles

    def measure(self, handle: ShareHandle, now: int) -> Measurement:
        key = (handle.state_id, handle.holder)
        live = self._handles.get(key)
        if live is None:
            raise NoSuchShare(key)
        if live.consumed:
            raise AlreadyMeasured(key)
        live.consumed = True
        handle.consumed = True
        st = self.states[handle.state_id]
        if st.coherent(now):
            if st.outcome is None:
                st.outcome = self._outcome_rng(st.state_id).randrange(st.dimension)
            m = Measurement(st.state_id, handle.holder, st.outcome, False, now)
        else:
            self._noise_calls += 1
            rng = random.Random(f"{self.seed}/noise/{st.state_id}/{handle.holder}/{self._noise_calls}")
            m = Measurement(st.state_id, handle.holder, rng.randrange(st.dimension), True, now)
        self.measurements.append(m)
        self._emit("decohered" if m.decohered else "measured", state=m.state_id,
                   node=m.holder, digit=m.digit)
        return m

    def revoke_epoch(self, epoch: int) -> int:
        count = 0
        for st in self._by_epoch.get(epoch, ()):
            if not st.revoked:
                st.revoked = True
                count += 1
        if count:
            self._emit("revoked", epoch=epoch, count=count)
        return count


def assemble(digits, d: int) -> int:
    """Radix-d value of ``digits``, first digit most significant."""
    value = 0
    for x in digits:
        value = value * d + x
    return value


def snap_violations(measurements) -> list:
    """State ids whose coherent measurements disagree across parties."""
    seen = {}
    bad = set()
    for m in measurements:
        if m.decohered:
            continue
        if seen.setdefault(m.state_id, m.digit) != m.digit:
            bad.add(m.state_id)
    return sorted(bad)
