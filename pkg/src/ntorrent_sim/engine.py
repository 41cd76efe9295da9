"""Discrete-event core: clock, event queue, links and network assembly.

Simulation time is integer nanoseconds.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field, replace

from . import routing
from .apps import ConsumerApp, ProducerApp
from .forwarder import Face, Forwarder, NS_PER_MS
from .packets import Data, Interest, Nack, Name, wire_size
from .routing import DuplicateLink, Topology
from .strategies import make_strategy
from .torrent import TorrentParams, build_torrent
from .tracing import RateTracer

log = logging.getLogger(__name__)

APP_FACE_BASE = 256


class InternalError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


def ms_to_ns(ms: float) -> int:
    return int(round(ms * NS_PER_MS))


@dataclass
class Event:
    at: int
    seq: int
    action: object
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: Event) -> bool:
        return (self.at, self.seq) < (other.at, other.seq)


class Simulator:
    def __init__(self, seed: int = 0):
        self.now = 0
        self.rng = random.Random(seed)
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self._nonces: set[int] = set()
        self._stopped = False
        self.executed = 0

    def schedule(self, at: int, action) -> Event:
        if at < self.now:
            raise InternalError(f"event scheduled into the past: {at} < {self.now}")
        event = Event(int(at), next(self._seq), action)
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay: int, action) -> Event:
        return self.schedule(self.now + delay, action)

    def new_nonce(self) -> int:
        while True:
            nonce = self.rng.getrandbits(32)
            if nonce not in self._nonces:
                self._nonces.add(nonce)
                return nonce

    def stop(self) -> None:
        self._stopped = True

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def run(self, until: int | None = None, after_event=None) -> int:
        while self._queue and not self._stopped:
            event = self._queue[0]
            if until is not None and event.at > until:
                self.now = until
                break
            heapq.heappop(self._queue)
            if event.cancelled:
                continue
            if event.at < self.now:
                raise InternalError("clock moved backwards")
            self.now = event.at
            self.executed += 1
            event.action()
            if after_event is not None:
                after_event()
        return self.now


@dataclass
class Link:
    link_id: int
    node_a: str
    face_a: int
    node_b: str
    face_b: int
    data_rate: int
    delay_ns: int
    busy_until: list[int] = field(default_factory=lambda: [0, 0])
    enqueued: list[int] = field(default_factory=lambda: [0, 0])
    delivered: list[int] = field(default_factory=lambda: [0, 0])

    def transmit(self, direction: int, size_bytes: int, now: int) -> int:
        """Serialize ``size_bytes`` onto the link; returns the arrival time."""
        if size_bytes < 1:
            raise ValueError("packet size must be at least one byte")
        start = max(now, self.busy_until[direction])
        tx = -(-size_bytes * 8 * 1_000_000_000 // self.data_rate)
        self.busy_until[direction] = start + tx
        self.enqueued[direction] += 1
        return start + tx + self.delay_ns

    def far_end(self, direction: int) -> tuple[str, int]:
        return (self.node_b, self.face_b) if direction == 0 else (self.node_a, self.face_a)


@dataclass
class NodeSpec:
    name: str
    role: str = "router"  # router | seeder | consumer
    start_ms: float = 1000


@dataclass
class Node:
    name: str
    index: int
    role: str
    forwarder: Forwarder
    links: dict[int, tuple[Link, int]] = field(default_factory=dict)
    apps: dict[int, object] = field(default_factory=dict)
    face_to: dict[str, int] = field(default_factory=dict)
    local_routes: list[tuple[Name, int]] = field(default_factory=list)
    _next_face: int = 1
    _next_app_face: int = APP_FACE_BASE

    def face_count(self, kind: str | None = None) -> int:
        return sum(1 for f in self.forwarder.faces.values() if kind is None or f.kind == kind)


@dataclass
class RunReport:
    end_ms: float
    completed: dict[str, bool]
    finish_ms: dict[str, float | None]
    failures: list[str]
    events: int
    violations: list[str]

    @property
    def all_completed(self) -> bool:
        return all(self.completed.values()) and not self.failures


class _AppHost:
    def __init__(self, network: Network, node: Node, app):
        self.network = network
        self.node = node
        self.app = app

    @property
    def now(self) -> int:
        return self.network.sim.now

    def send(self, packet) -> None:
        self.network.app_send(self.node, self.app.face_id, packet)

    def schedule_in(self, delay_ns: int, fn):
        return self.network.sim.schedule_in(delay_ns, fn)

    def new_nonce(self) -> int:
        return self.network.sim.new_nonce()

    def announce(self, name: Name) -> None:
        self.network.announce(self.node.name, name, self.app.face_id)

    def completed(self, app) -> None:
        self.network.on_completed(self.node, app)

    def failed(self, app, reason: str) -> None:
        self.network.on_failed(self.node, app, reason)


class Network:
    """A set of NDN nodes joined by links, plus the event loop that drives them."""

    def __init__(self, params: TorrentParams | None = None, strategy: str = "ntorrent",
                 seed: int = 0, trace_interval_ms: float = 500, cs_capacity: int | None = None,
                 router_cache: bool = True, audit: bool = False,
                 strict_phase_barrier: bool = False, retransmit_ms: int = 1000):
        self.params = params or TorrentParams()
        self.params.validate()
        make_strategy(strategy)
        self.strategy_name = strategy
        self.seed = seed
        self.sim = Simulator(seed)
        self.topology = Topology()
        self.nodes: dict[str, Node] = {}
        self.links: list[Link] = []
        self.tracer = RateTracer(trace_interval_ms, self.topology.nodes)
        self.cs_capacity = cs_capacity
        self.router_cache = router_cache
        self.audit = audit
        self.strict_phase_barrier = strict_phase_barrier
        self.retransmit_ms = retransmit_ms
        self.events: list[tuple] = []
        self.violations: list[str] = []
        self.failures: list[str] = []
        self.recomputes = 0
        self._recompute_event: Event | None = None
        self._bundle = None

    # -- construction -----------------------------------------------------

    @property
    def bundle(self):
        if self._bundle is None:
            self._bundle = build_torrent(self.params)
        return self._bundle

    def add_node(self, name: str, role: str = "router") -> Node:
        if name in self.nodes:
            raise ConfigError(f"duplicate node {name!r}")
        self.topology.add_node(name)
        forwarder = Forwarder(name, make_strategy(self.strategy_name), self.cs_capacity,
                              cache_enabled=(role == "router" and self.router_cache),
                              scheduler=self.sim)
        node = Node(name, len(self.nodes), role, forwarder)
        self.nodes[name] = node
        return node

    def create_link(self, a: str, b: str, data_rate: float, delay_ms: float) -> Link:
        if a not in self.nodes or b not in self.nodes:
            raise ConfigError(f"link {a}-{b}: unknown node")
        if data_rate <= 0:
            raise ConfigError(f"link {a}-{b}: data rate must be positive")
        try:
            self.topology.add_link(a, b, data_rate, delay_ms)
        except DuplicateLink:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        na, nb = self.nodes[a], self.nodes[b]
        link = Link(len(self.links), a, na._next_face, b, nb._next_face,
                    int(round(data_rate)), ms_to_ns(delay_ms))
        for node, face_id, peer, direction in ((na, link.face_a, b, 0), (nb, link.face_b, a, 1)):
            node.forwarder.add_face(Face(face_id, "link", link.link_id, peer))
            node.links[face_id] = (link, direction)
            node.face_to[peer] = face_id
            node._next_face += 1
        self.links.append(link)
        return link

    def install_app(self, node: Node, app) -> int:
        face_id = node._next_app_face
        node._next_app_face += 1
        node.forwarder.add_face(Face(face_id, "app", app_id=type(app).__name__))
        app.face_id = face_id
        app.host = _AppHost(self, node, app)
        node.apps[face_id] = app
        return face_id

    def create_and_install(self, spec: NodeSpec) -> Node:
        node = self.add_node(spec.name, spec.role)
        if spec.role == "seeder":
            app = ProducerApp(spec.name, self.bundle)
            self.install_app(node, app)
            self.announce(spec.name, app.prefix, app.face_id)
        elif spec.role == "consumer":
            app = ConsumerApp(spec.name, self.params, spec.start_ms,
                              retransmit_ms=self.retransmit_ms,
                              strict_phase_barrier=self.strict_phase_barrier)
            self.install_app(node, app)
            self.sim.schedule(ms_to_ns(spec.start_ms), app.start)
        elif spec.role != "router":
            raise ConfigError(f"unknown role {spec.role!r}")
        return node

    def consumers(self) -> list[ConsumerApp]:
        return [a for n in self.nodes.values() for a in n.apps.values()
                if isinstance(a, ConsumerApp)]

    def seeders(self) -> list[ProducerApp]:
        return [a for n in self.nodes.values() for a in n.apps.values()
                if isinstance(a, ProducerApp)]

    # -- routing ------------------------------------------------------------

    def announce(self, node_name: str, name: Name, app_face: int) -> None:
        if not routing.announce(self.topology, node_name, name):
            return
        node = self.nodes[node_name]
        node.local_routes.append((name, app_face))
        node.forwarder.fib_add_nexthop(name, app_face, 0)
        if self._recompute_event is None:
            self._recompute_event = self.sim.schedule(self.sim.now, self.recompute)

    def recompute(self) -> None:
        self._recompute_event = None
        self.recomputes += 1
        routes = routing.calculate_routes(self.topology)
        for name, node in self.nodes.items():
            fib = node.forwarder.fib
            fib.clear()
            for prefix, face in node.local_routes:
                fib.add_nexthop(prefix, face, 0)
            for prefix, hops in routes[name].items():
                for hop in hops:
                    fib.add_nexthop(prefix, node.face_to[hop.neighbor], hop.cost)

    # -- packet movement --------------------------------------------------

    def _trace(self, node: Node, face_id: int, direction: str, packet) -> None:
        kind = "Data" if isinstance(packet, Data) else "Nacks" if isinstance(packet, Nack) else "Interests"
        size = wire_size(packet)
        self.tracer.record(self.sim.now, node.name, face_id, direction + kind, size)
        nonce = getattr(packet, "nonce", None)
        self.events.append((self.sim.now, node.name, face_id, direction, kind, str(packet.name), nonce))

    def forwarder_send(self, node: Node, face_id: int, packet) -> None:
        self._trace(node, face_id, "Out", packet)
        if face_id in node.links:
            link, direction = node.links[face_id]
            if isinstance(packet, Data):
                packet = replace(packet, hops=packet.hops + (node.name,))
            arrival = link.transmit(direction, wire_size(packet), self.sim.now)
            peer, peer_face = link.far_end(direction)

            def deliver(packet=packet):
                link.delivered[direction] += 1
                self.receive(self.nodes[peer], peer_face, packet)

            self.sim.schedule(arrival, deliver)
        else:
            app = node.apps[face_id]
            self.sim.schedule(self.sim.now, lambda: self._to_app(node, app, packet))

    def _to_app(self, node: Node, app, packet) -> None:
        if isinstance(packet, Interest):
            reply = app.on_interest(packet)
            if reply is not None:
                self.app_send(node, app.face_id, reply)
        elif isinstance(packet, Data):
            app.on_data(packet)
        else:
            app.on_nack(packet)

    def app_send(self, node: Node, face_id: int, packet) -> None:
        if isinstance(packet, Data):
            packet = replace(packet, origin=(node.name, face_id, "app"), hops=())
        self.sim.schedule(self.sim.now, lambda: self.receive(node, face_id, packet))

    def receive(self, node: Node, face_id: int, packet) -> None:
        self._trace(node, face_id, "In", packet)
        fw = node.forwarder
        now = self.sim.now
        if isinstance(packet, Interest):
            out = fw.on_incoming_interest(face_id, packet, now)
        elif isinstance(packet, Data):
            out = fw.on_incoming_data(face_id, packet, now)
        else:
            out = fw.on_incoming_nack(face_id, packet, now)
        for out_face, pkt in out:
            self.forwarder_send(node, out_face, pkt)

    # -- lifecycle --------------------------------------------------------

    def on_completed(self, node: Node, app) -> None:
        log.info("%s completed at %.3f ms", node.name, self.sim.now / NS_PER_MS)

    def on_failed(self, node: Node, app, reason: str) -> None:
        self.failures.append(f"{node.name}: {reason}")
        log.error("%s aborted: %s", node.name, reason)
        self.sim.stop()

    def _audit(self) -> None:
        now = self.sim.now
        for node in self.nodes.values():
            self.violations.extend(node.forwarder.audit(now))

    def run(self, max_sim_time_ms: float = 60_000) -> RunReport:
        if self._recompute_event is not None:
            # routes must exist before the first interest leaves
            self._recompute_event.cancel()
            self.recompute()
        self.sim.run(until=ms_to_ns(max_sim_time_ms),
                     after_event=self._audit if self.audit else None)
        self.tracer.finish()
        consumers = self.consumers()
        return RunReport(
            end_ms=self.sim.now / NS_PER_MS,
            completed={c.node: c.completed for c in consumers},
            finish_ms={c.node: None if c.finish_ns is None else c.finish_ns / NS_PER_MS
                       for c in consumers},
            failures=list(self.failures),
            events=self.sim.executed,
            violations=list(self.violations),
        )

    def dump_tables(self) -> list[dict]:
        now = self.sim.now
        out = []
        for node in self.nodes.values():
            node.forwarder.purge(now)
            out.append(node.forwarder.dump())
        return out
