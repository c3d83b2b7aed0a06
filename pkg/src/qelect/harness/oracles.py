"""Reference values computed without the simulator."""

from __future__ import annotations

import math

import numpy as np


def bully_lowest_initiator_messages(k: int) -> int:
    """Messages of a failure-free Bully run among ``k`` members started by
    the lowest id: every node challenges all higher ids, every challenge is
    answered, and the winner announces to everyone else."""
    challenges = sum(k - 1 - i for i in range(k))
    # each challenged node answers and then challenges in turn, so the
    # challenge and answer counts are equal
    return 2 * challenges + (k - 1)


def fit_fault_constant(max_members: int = 64) -> float:
    """Smallest integer c with Bully cost <= c * k^2 for k = 1..max_members."""
    ratio = max(bully_lowest_initiator_messages(k) / (k * k) for k in range(1, max_members + 1))
    return float(math.ceil(ratio))


def chang_roberts_worst(n: int) -> int:
    """Election messages when ids decrease along the message direction."""
    return n * (n + 1) // 2


def quantum_round_messages(n: int) -> int:
    return 3 * (n - 1)


def itai_rodeh_phases_mc(n: int, samples: int, seed: int = 0) -> float:
    """Monte-Carlo mean of the winning phase number.

    Every active node draws uniformly from 1..n each phase; the holders of
    the maximum stay active; the run ends once the maximum is unique.
    """
    rng = np.random.default_rng(seed)
    active = np.full(samples, n)
    phases = np.zeros(samples, dtype=np.int64)
    open_ = np.ones(samples, dtype=bool)
    while open_.any():
        idx = np.flatnonzero(open_)
        draws = rng.integers(1, n + 1, size=(idx.size, n))
        mask = np.arange(n)[None, :] < active[idx, None]
        draws = np.where(mask, draws, 0)
        top = draws.max(axis=1)
        ties = (draws == top[:, None]).sum(axis=1)
        phases[idx] += 1
        active[idx] = ties
        open_[idx] = ties > 1
    return float(phases.mean())


def itai_rodeh_phases_exact(n: int) -> float:
    """Exact expected winning phase by recursion over the active count."""
    from math import comb

    def p_ties(a: int, m: int) -> float:
        # probability that exactly m of a uniform draws on 1..n share the maximum
        return sum(comb(a, m) * (1 / n) ** m * ((v - 1) / n) ** (a - m) for v in range(1, n + 1))

    expected = {1: 0.0}
    for a in range(2, n + 1):
        rest = sum(p_ties(a, m) * expected[m] for m in range(2, a))
        expected[a] = (1 + rest) / (1 - p_ties(a, a))
    # the first phase always happens, even for a=1 the winner needs one pass
    return expected[n] if n > 1 else 1.0
