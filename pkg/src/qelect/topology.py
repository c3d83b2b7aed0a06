"""Graph model of the simulated system: rings, cliques and explicit edge lists."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidIds, InvalidSize, NoSuchNode, NotConnected

UNI = "uni"
BI = "bi"

_DIRECTION_ALIASES = {
    "uni": UNI,
    "unidirectional": UNI,
    "bi": BI,
    "bidirectional": BI,
}


def _direction(value: str) -> str:
    try:
        return _DIRECTION_ALIASES[value]
    except KeyError:
        raise ValueError(f"unknown direction {value!r}") from None


@dataclass(frozen=True)
class Topology:
    """Immutable graph over node ids ``0..n-1``.

    ``edges`` holds ordered pairs. For bidirectional graphs each undirected
    edge is stored once as ``(min, max)``. ``ring_order`` lists the node ids
    by ring position; position ``i`` sends to position ``i+1`` (mod n).
    """

    node_count: int
    kind: str
    direction: str
    edges: frozenset
    anonymous: bool = False
    ring_order: tuple | None = None
    _out: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        out = {v: set() for v in range(self.node_count)}
        for a, b in self.edges:
            out[a].add(b)
            if self.direction == BI:
                out[b].add(a)
        object.__setattr__(self, "_out", {v: tuple(sorted(s)) for v, s in out.items()})

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def _check(self, node: int) -> None:
        if node not in self._out:
            raise NoSuchNode(node)

    def neighbors(self, node: int) -> tuple:
        """Nodes reachable in one hop (out-neighbours for directed graphs)."""
        self._check(node)
        return self._out[node]

    def has_edge(self, src: int, dst: int) -> bool:
        return src in self._out and dst in self._out[src]

    def position(self, node: int) -> int:
        if self.ring_order is None:
            raise ValueError("not a ring")
        self._check(node)
        return self.ring_order.index(node)

    def successor(self, node: int) -> int:
        """Next node in message direction around a ring."""
        pos = self.position(node)
        return self.ring_order[(pos + 1) % self.node_count]

    def predecessor(self, node: int) -> int:
        pos = self.position(node)
        return self.ring_order[(pos - 1) % self.node_count]

    def is_connected(self) -> bool:
        if self.node_count <= 1:
            return True
        return all(len(_bfs(self, s)) == self.node_count for s in self.nodes)


def _bfs(t: Topology, source: int) -> dict:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in t._out[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _resolve_order(n: int, id_order, seed) -> list:
    if id_order in (None, "sorted"):
        return list(range(n))
    if id_order == "reversed":
        return list(range(n - 1, -1, -1))
    if id_order == "random":
        order = list(range(n))
        rng = seed if isinstance(seed, random.Random) else random.Random(seed)
        rng.shuffle(order)
        return order
    if isinstance(id_order, str):
        raise InvalidIds(f"unknown id order {id_order!r}")
    order = list(id_order)
    if sorted(order) != list(range(n)):
        raise InvalidIds(f"id list must be a permutation of 0..{n - 1}: {order}")
    return order


def build_ring(
    n: int,
    direction: str = UNI,
    id_order: str | Sequence[int] = "sorted",
    seed: int | random.Random | None = None,
    anonymous: bool = False,
) -> Topology:
    """Ring of ``n`` nodes.

    ``id_order`` is ``"sorted"``, ``"reversed"``, ``"random"`` (shuffled
    with ``seed``) or an explicit permutation of ``0..n-1`` giving the id at
    each ring position.
    """
    if not isinstance(n, int) or n < 2:
        raise InvalidSize(f"ring needs at least 2 nodes, got {n}")
    direction = _direction(direction)
    order = _resolve_order(n, id_order, seed)
    edges = set()
    for i in range(n):
        a, b = order[i], order[(i + 1) % n]
        edges.add((a, b) if direction == UNI else (min(a, b), max(a, b)))
    return Topology(n, "ring", direction, frozenset(edges), anonymous, tuple(order))


def build_clique(n: int) -> Topology:
    if not isinstance(n, int) or n < 1:
        raise InvalidSize(f"clique needs at least 1 node, got {n}")
    edges = frozenset((a, b) for a in range(n) for b in range(a + 1, n))
    return Topology(n, "clique", BI, edges)


def from_edges(n: int, edges: Iterable, direction: str = BI) -> Topology:
    """Arbitrary topology from an explicit edge list; must be connected."""
    if not isinstance(n, int) or n < 1:
        raise InvalidSize(f"topology needs at least 1 node, got {n}")
    direction = _direction(direction)
    norm = set()
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise InvalidIds(f"bad edge ({a}, {b})")
        norm.add((a, b) if direction == UNI else (min(a, b), max(a, b)))
    t = Topology(n, "arbitrary", direction, frozenset(norm))
    if not t.is_connected():
        raise NotConnected("edge list does not connect every pair of nodes")
    return t


def degree(t: Topology, node: int) -> int:
    return len(t.neighbors(node))


def diameter(t: Topology) -> int:
    """Longest shortest-path hop count over ordered node pairs."""
    best = 0
    for s in t.nodes:
        dist = _bfs(t, s)
        if len(dist) != t.node_count:
            raise NotConnected(f"node {s} cannot reach every node")
        best = max(best, max(dist.values()))
    return best
