"""Per-node forwarding plane: Content Store, PIT, FIB and the packet pipelines.

Pipeline calls return the packets to emit as ``(face_id, packet)`` pairs; the
caller owns delivery.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace

from .packets import Data, Interest, Name, Nack, NackReason

log = logging.getLogger(__name__)

NS_PER_MS = 1_000_000


class NoViableHop(Exception):
    """Raised by a strategy when every next hop is excluded."""


@dataclass(frozen=True)
class Face:
    face_id: int
    kind: str  # "link" or "app"
    link_id: int | None = None
    peer: str | None = None
    app_id: str | None = None

    @property
    def is_app(self) -> bool:
        return self.kind == "app"


class ContentStore:
    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self.entries: OrderedDict[Name, Data] = OrderedDict()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return name in self.entries

    def insert(self, data: Data) -> None:
        if data.name in self.entries:
            self.entries.move_to_end(data.name)
        self.entries[data.name] = replace(data, origin=None, hops=())
        if self.capacity is not None:
            while len(self.entries) > self.capacity:
                self.entries.popitem(last=False)

    def find(self, name: Name) -> Data | None:
        data = self.entries.get(name)
        if data is not None:
            return data
        if name.digest is not None:
            data = self.entries.get(name.strip_digest())
            if data is not None and data.matches(name):
                return data
        return None


@dataclass
class PitEntry:
    name: Name
    expiry: int
    nonces: set[int] = field(default_factory=set)
    # face_id -> (arrival ns, nonce)
    in_faces: dict[int, tuple[int, int]] = field(default_factory=dict)
    # face_id -> nonce used upstream
    out_faces: dict[int, int] = field(default_factory=dict)
    tried: set[int] = field(default_factory=set)
    hop_count: int = 0
    nacked: set[int] = field(default_factory=set)
    timer: object = field(default=None, repr=False, compare=False)


@dataclass
class FibEntry:
    prefix: Name
    nexthops: list[tuple[int, float]] = field(default_factory=list)

    def faces(self) -> list[int]:
        return [f for f, _ in self.nexthops]


class Fib:
    def __init__(self):
        self.entries: dict[Name, FibEntry] = {}

    def add_nexthop(self, prefix: Name, face_id: int, cost: float = 0) -> FibEntry:
        entry = self.entries.setdefault(prefix, FibEntry(prefix))
        hops = {f: c for f, c in entry.nexthops}
        hops[face_id] = cost
        entry.nexthops = sorted(hops.items(), key=lambda fc: (fc[1], fc[0]))
        return entry

    def lpm(self, name: Name) -> FibEntry | None:
        for k in range(len(name), 0, -1):
            entry = self.entries.get(name[:k])
            if entry is not None:
                return entry
        return None

    def clear(self):
        self.entries.clear()


class Forwarder:
    """NDN forwarding pipelines for one node.

    ``scheduler`` (optional) must provide ``schedule(at_ns, fn)`` returning a
    handle with ``cancel()``; it arms PIT expiry timers. Without it entries
    are purged lazily on every pipeline call.
    """

    def __init__(self, node: str, strategy, cs_capacity: int | None = None,
                 cache_enabled: bool = True, scheduler=None):
        self.node = node
        self.strategy = strategy
        self.cs = ContentStore(cs_capacity)
        self.cache_enabled = cache_enabled
        self.pit: dict[Name, PitEntry] = {}
        self.fib = Fib()
        self.faces: dict[int, Face] = {}
        self.scheduler = scheduler
        self.counters = {"unsolicited": 0, "cs_hits": 0, "expired": 0, "satisfied": 0}

    def add_face(self, face: Face) -> None:
        if face.face_id in self.faces:
            raise ValueError(f"{self.node}: face {face.face_id} already exists")
        self.faces[face.face_id] = face

    # -- tables -----------------------------------------------------------

    def cs_insert(self, data: Data) -> None:
        self.cs.insert(data)

    def cs_find(self, name: Name) -> Data | None:
        return self.cs.find(name)

    def fib_add_nexthop(self, prefix: Name, face_id: int, cost: float = 0) -> FibEntry:
        return self.fib.add_nexthop(prefix, face_id, cost)

    def fib_lpm(self, name: Name) -> FibEntry | None:
        return self.fib.lpm(name)

    def _erase(self, entry: PitEntry) -> None:
        if self.pit.get(entry.name) is entry:
            del self.pit[entry.name]
        if entry.timer is not None:
            entry.timer.cancel()
            entry.timer = None

    def _arm(self, entry: PitEntry) -> None:
        if self.scheduler is None:
            return
        if entry.timer is not None:
            entry.timer.cancel()
        entry.timer = self.scheduler.schedule(entry.expiry, lambda: self._expire(entry))

    def _expire(self, entry: PitEntry) -> None:
        entry.timer = None
        if self.pit.get(entry.name) is entry:
            del self.pit[entry.name]
            self.counters["expired"] += 1

    def purge(self, now: int) -> None:
        for entry in [e for e in self.pit.values() if e.expiry <= now]:
            self._erase(entry)
            self.counters["expired"] += 1

    # -- pipelines --------------------------------------------------------

    def on_incoming_interest(self, face: int, interest: Interest, now: int) -> list:
        self.purge(now)
        name = interest.name
        entry = self.pit.get(name)

        if entry is not None and interest.nonce in entry.nonces:
            return [(face, Nack(name, interest.nonce, NackReason.DUPLICATE))]

        hit = self.cs_find(name) if self.cache_enabled else None
        if hit is not None:
            self.counters["cs_hits"] += 1
            return [(face, replace(hit, origin=(self.node, None, "cs"), hops=()))]

        expiry = now + interest.lifetime_ms * NS_PER_MS
        if entry is not None and face in entry.out_faces:
            # the upstream we are waiting on asks us back: aggregating would deadlock
            return [(face, Nack(name, interest.nonce, NackReason.DUPLICATE))]
        if entry is not None:
            retransmission = face in entry.in_faces
            entry.nonces.add(interest.nonce)
            entry.in_faces[face] = (now, interest.nonce)
            if expiry > entry.expiry:
                entry.expiry = expiry
                self._arm(entry)
            if not retransmission:
                return []
            return self._forward(entry, interest, face, now)

        entry = PitEntry(name, expiry, {interest.nonce}, {face: (now, interest.nonce)})
        self.pit[name] = entry
        self._arm(entry)
        return self._forward(entry, interest, face, now)

    def _forward(self, entry, interest, in_face, now):
        fib_entry = self.fib_lpm(interest.name)
        if fib_entry is None:
            return self._reject(entry, interest, in_face, NackReason.NO_ROUTE)
        try:
            ranked = self.strategy.after_receive_interest(interest, in_face, entry, fib_entry, now)
        except NoViableHop:
            return self._reject(entry, interest, in_face, NackReason.NO_ROUTE)
        if not ranked:
            return self._reject(entry, interest, in_face, NackReason.NO_ROUTE)
        # a retransmission moves on to a hop not tried yet, when there is one
        untried = [f for f in ranked if f not in entry.tried]
        out = untried[0] if untried else ranked[0]
        entry.tried.add(out)
        entry.out_faces[out] = interest.nonce
        entry.hop_count = interest.hop_count + 1
        return [(out, replace(interest, hop_count=interest.hop_count + 1))]

    def _reject(self, entry, interest, in_face, reason):
        if entry.out_faces:
            # an earlier forward is still pending upstream
            return [(in_face, Nack(interest.name, interest.nonce, reason))]
        out = [(f, Nack(entry.name, nonce, reason)) for f, (_, nonce) in entry.in_faces.items()]
        self._erase(entry)
        return out

    def _matching_entries(self, data: Data) -> list[PitEntry]:
        found = []
        for entry in self.pit.values():
            if entry.name == data.name or data.matches(entry.name):
                found.append(entry)
        return found

    def on_incoming_data(self, face: int, data: Data, now: int) -> list:
        self.purge(now)
        entries = self._matching_entries(data)
        if not entries:
            self.counters["unsolicited"] += 1
            log.debug("%s: dropped unsolicited %s from face %d", self.node, data.name, face)
            return []
        if self.cache_enabled:
            self.cs_insert(data)
        out = []
        sent = set()
        for entry in entries:
            self.strategy.before_satisfy_interest(entry, face, data, now)
            self.counters["satisfied"] += 1
            for f in entry.in_faces:
                if f not in sent and f != face:
                    sent.add(f)
                    out.append((f, data))
            self._erase(entry)
        return out

    def on_incoming_nack(self, face: int, nack: Nack, now: int) -> list:
        self.purge(now)
        entry = self.pit.get(nack.name)
        if entry is None or entry.out_faces.get(face) != nack.nonce:
            return []
        del entry.out_faces[face]
        entry.nacked.add(face)
        if entry.out_faces:
            return []
        fib_entry = self.fib_lpm(entry.name)
        if fib_entry is not None:
            ranked = self.strategy.retry_after_nack(entry, fib_entry, now)
            for f in ranked:
                if f in entry.tried or f in entry.in_faces:
                    continue
                entry.tried.add(f)
                entry.out_faces[f] = nack.nonce
                lifetime_ms = max(1, (entry.expiry - now) // NS_PER_MS)
                return [(f, Interest(entry.name, nack.nonce, lifetime_ms, entry.hop_count))]
        out = [(f, Nack(entry.name, nonce, nack.reason)) for f, (_, nonce) in entry.in_faces.items()]
        self._erase(entry)
        return out

    # -- inspection -------------------------------------------------------

    def audit(self, now: int) -> list[str]:
        problems = []
        for entry in self.pit.values():
            if not entry.in_faces:
                problems.append(f"{self.node}: PIT {entry.name} has no in-face")
            if entry.expiry < now:
                problems.append(f"{self.node}: PIT {entry.name} survived expiry")
        for name, data in self.cs.entries.items():
            if data.name != name:
                problems.append(f"{self.node}: CS key {name} holds {data.name}")
        return problems

    def dump(self) -> dict:
        return {
            "node": self.node,
            "cs": [str(n) for n in self.cs.entries],
            "pit": [str(n) for n in self.pit],
            "fib": {str(p): [[f, c] for f, c in e.nexthops] for p, e in self.fib.entries.items()},
        }
