"""Global routing: prefix origins, per-face shortest paths and FIB population."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

from .packets import Name


class UnknownNode(KeyError):
    pass


class DuplicateLink(ValueError):
    pass


@dataclass(frozen=True)
class TopoLink:
    a: str
    b: str
    data_rate: float
    delay_ms: float


class NextHop(NamedTuple):
    neighbor: str
    cost: float


@dataclass
class Topology:
    nodes: list[str] = field(default_factory=list)
    links: list[TopoLink] = field(default_factory=list)
    origins: dict[Name, set[str]] = field(default_factory=dict)

    def add_node(self, node: str) -> None:
        if node in self.nodes:
            raise ValueError(f"duplicate node {node!r}")
        self.nodes.append(node)

    def add_link(self, a: str, b: str, data_rate: float, delay_ms: float) -> TopoLink:
        for n in (a, b):
            if n not in self.nodes:
                raise UnknownNode(n)
        if a == b:
            raise ValueError(f"self-loop on {a!r}")
        if any({l.a, l.b} == {a, b} for l in self.links):
            raise DuplicateLink(f"{a}-{b}")
        if data_rate <= 0:
            raise ValueError(f"link {a}-{b}: data rate must be positive")
        if delay_ms < 0:
            raise ValueError(f"link {a}-{b}: delay must be non-negative")
        link = TopoLink(a, b, data_rate, delay_ms)
        self.links.append(link)
        return link

    def add_origin(self, prefix: Name, node: str) -> bool:
        """Record ``node`` as an origin of ``prefix``; returns True if new."""
        if node not in self.nodes:
            raise UnknownNode(node)
        holders = self.origins.setdefault(prefix, set())
        if node in holders:
            return False
        holders.add(node)
        return True

    def adjacency(self) -> dict[str, list[tuple[str, float]]]:
        """Neighbors per node in link-creation order (the face order)."""
        adj = {n: [] for n in self.nodes}
        for l in self.links:
            adj[l.a].append((l.b, l.delay_ms))
            adj[l.b].append((l.a, l.delay_ms))
        return adj


def _distances(adj, sources, excluded):
    """Multi-source Dijkstra over the graph with ``excluded`` removed."""
    dist = {}
    heap = [(0.0, s) for s in sorted(sources) if s != excluded]
    heapq.heapify(heap)
    while heap:
        d, n = heapq.heappop(heap)
        if n in dist:
            continue
        dist[n] = d
        for m, w in adj[n]:
            if m != excluded and m not in dist:
                heapq.heappush(heap, (d + w, m))
    return dist


def calculate_routes(topology: Topology) -> dict[str, dict[Name, list[NextHop]]]:
    """Next hops for every (node, prefix) pair.

    Each face of a node gets the cost of the cheapest loop-free path that
    leaves through it and ends at any origin of the prefix. Hops are ranked
    by ascending cost, ties by face (link-creation) order. Origins of a
    prefix get no computed hops for it.
    """
    adj = topology.adjacency()
    routes: dict[str, dict[Name, list[NextHop]]] = {n: {} for n in topology.nodes}
    cache: dict[tuple[frozenset, str], dict[str, float]] = {}
    for prefix in sorted(topology.origins):
        holders = frozenset(topology.origins[prefix])
        if not holders:
            continue
        for node in topology.nodes:
            if node in holders:
                continue
            key = (holders, node)
            if key not in cache:
                cache[key] = _distances(adj, holders, node)
            dist = cache[key]
            hops = []
            for order, (nbr, w) in enumerate(adj[node]):
                if nbr in dist:
                    hops.append((w + dist[nbr], order, nbr))
            if hops:
                hops.sort()
                routes[node][prefix] = [NextHop(nbr, cost) for cost, _, nbr in hops]
    return routes


def announce(topology: Topology, node: str, name: Name) -> bool:
    """Make ``node`` an origin of the exact ``name``.

    Returns True when the origin is new and routes must be recomputed.
    """
    return topology.add_origin(name, node)
