"""nTorrent applications: the seeder and the downloading peer.

Apps talk to the network through a ``host`` object bound at install time.
It provides ``now`` (ns), ``send(packet)``, ``schedule_in(delay_ns, fn)``,
``new_nonce()``, ``announce(name)``, ``completed(app)`` and
``failed(app, reason)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .forwarder import NS_PER_MS
from .packets import DEFAULT_LIFETIME_MS, Data, Interest, Name, Nack, NackReason
from .strategies import Metrics
from .torrent import (
    NameClass,
    TorrentBundle,
    TorrentParams,
    build_torrent,
    classify_name,
    decode_object,
    torrent_prefix,
)

log = logging.getLogger(__name__)

RETRANSMIT_MS = 1000
MAX_ATTEMPTS = 5


def lookup(store: dict[Name, Data], name: Name) -> Data | None:
    """Exact, digest-aware lookup in a base-name keyed store."""
    data = store.get(name.strip_digest())
    if data is not None and data.matches(name):
        return data
    return None


class App:
    role = "app"

    def __init__(self, node: str):
        self.node = node
        self.host = None
        self.face_id: int | None = None

    def answer(self, store, interest: Interest):
        if classify_name(interest.name) is NameClass.UNKNOWN:
            return Nack(interest.name, interest.nonce, NackReason.NO_CONTENT)
        data = lookup(store, interest.name)
        if data is None:
            return Nack(interest.name, interest.nonce, NackReason.NO_CONTENT)
        return data

    def on_interest(self, interest: Interest):
        return Nack(interest.name, interest.nonce, NackReason.NO_CONTENT)

    def on_data(self, data: Data):
        return []

    def on_nack(self, nack: Nack):
        return []


class ProducerApp(App):
    """Seeder: holds the whole bundle from the start."""

    role = "seeder"

    def __init__(self, node: str, bundle: TorrentBundle):
        super().__init__(node)
        self.bundle = bundle
        self.store = bundle.store()
        self.served = 0

    @property
    def prefix(self) -> Name:
        return torrent_prefix(self.bundle.params.torrent_name)

    def on_interest(self, interest: Interest):
        reply = self.answer(self.store, interest)
        if isinstance(reply, Data):
            self.served += 1
        return reply


@dataclass
class Outstanding:
    name: Name
    nonce: int
    first_sent: int
    last_sent: int
    attempts: int = 1
    timer: object = field(default=None, repr=False)


class ConsumerApp(App):
    """Leecher that turns peer as soon as it holds an object."""

    role = "consumer"

    def __init__(self, node: str, params: TorrentParams, start_ms: float = 1000,
                 retransmit_ms: int = RETRANSMIT_MS, max_attempts: int = MAX_ATTEMPTS,
                 strict_phase_barrier: bool = False, lifetime_ms: int = DEFAULT_LIFETIME_MS):
        super().__init__(node)
        params.validate()
        self.params = params
        self.start_ms = start_ms
        self.retransmit_ms = retransmit_ms
        self.max_attempts = max_attempts
        self.strict_phase_barrier = strict_phase_barrier
        self.lifetime_ms = lifetime_ms

        self.have_segments: list[Data] = []
        self.have_manifests: list[Data] = []
        self.have_packets: list[Data] = []
        self.store: dict[Name, Data] = {}
        self.outstanding: dict[Name, Outstanding] = {}
        self.deferred: list[Name] = []
        self.metrics = Metrics()
        self.retransmissions = 0
        self.corrupt = 0
        self.nack_terminated = 0
        self.received_from: dict[Name, tuple] = {}
        self.completed = False
        self.finish_ns: int | None = None
        self.first_segment: Name | None = None

    @property
    def expected_packets(self) -> int:
        return self.params.packet_count

    def copy_torrent_file(self) -> Name:
        # both sides derive the torrent file from the same parameters
        self.first_segment = build_torrent(self.params).first_segment_name()
        return self.first_segment

    def start(self) -> list[Interest]:
        name = self.copy_torrent_file()
        return self.send_interest(name)

    def send_interest(self, name: Name) -> list[Interest]:
        base = name.strip_digest()
        if base in self.store or name in self.outstanding:
            return []
        now = self.host.now
        nonce = self.host.new_nonce()
        self.outstanding[name] = Outstanding(name, nonce, now, now)
        self.metrics.record_sent()
        return [self._emit(self.outstanding[name])]

    def _emit(self, entry: Outstanding) -> Interest:
        interest = Interest(entry.name, entry.nonce, self.lifetime_ms)
        if entry.timer is not None:
            entry.timer.cancel()
        entry.timer = self.host.schedule_in(self.retransmit_ms * NS_PER_MS,
                                            lambda: self._timeout(entry.name, entry.nonce))
        self.host.send(interest)
        return interest

    def _retransmit(self, entry: Outstanding) -> list[Interest]:
        if entry.attempts >= self.max_attempts:
            del self.outstanding[entry.name]
            if entry.timer is not None:
                entry.timer.cancel()
            self.nack_terminated += 1
            self.host.failed(self, f"{entry.name} unanswered after {entry.attempts} attempts")
            return []
        entry.attempts += 1
        entry.nonce = self.host.new_nonce()
        entry.last_sent = self.host.now
        self.retransmissions += 1
        return [self._emit(entry)]

    def _timeout(self, name: Name, nonce: int) -> None:
        entry = self.outstanding.get(name)
        if entry is not None and entry.nonce == nonce:
            self._retransmit(entry)

    def _match(self, data: Data) -> Outstanding | None:
        for name in (data.name, *[n for n in self.outstanding if n.strip_digest() == data.name]):
            entry = self.outstanding.get(name)
            if entry is not None:
                return entry
        return None

    def on_data(self, data: Data) -> list[Interest]:
        entry = self._match(data)
        if entry is None or data.name in self.store:
            return []
        if not data.matches(entry.name):
            self.corrupt += 1
            log.warning("%s: digest mismatch on %s", self.node, data.name)
            return self._retransmit(entry)

        now = self.host.now
        del self.outstanding[entry.name]
        if entry.timer is not None:
            entry.timer.cancel()
        self.metrics.record_satisfied(now - entry.last_sent)
        self.received_from[data.name] = (data.origin, data.hops)

        stored = Data(data.name, data.content, data.publisher_signature)
        self.store[data.name] = stored
        kind = classify_name(data.name)
        follow: list[Name] = []
        if kind is NameClass.TORRENT_SEGMENT:
            self.have_segments.append(stored)
            segment = decode_object(data.content)
            if segment.next_segment is not None:
                follow.append(segment.next_segment)
            if self.strict_phase_barrier:
                self.deferred.extend(segment.manifest_catalog)
                if segment.next_segment is None:
                    follow.extend(self.deferred)
                    self.deferred = []
            else:
                follow.extend(segment.manifest_catalog)
        elif kind is NameClass.FILE_MANIFEST:
            self.have_manifests.append(stored)
            manifest = decode_object(data.content)
            if manifest.next_manifest is not None:
                follow.append(manifest.next_manifest)
            follow.extend(manifest.packet_catalog)
        elif kind is NameClass.DATA_PACKET:
            self.have_packets.append(stored)
            log.info("%s: received %s (%d bytes)", self.node, data.name, len(data.content))

        self.host.announce(data.name)

        sent = []
        for name in follow:
            sent.extend(self.send_interest(name))
        if not self.completed and len(self.have_packets) == self.expected_packets:
            self.completed = True
            self.finish_ns = now
            self.host.completed(self)
        return sent

    def on_nack(self, nack: Nack) -> list[Interest]:
        entry = self.outstanding.get(nack.name)
        if entry is None or entry.nonce != nack.nonce:
            return []
        log.debug("%s: nack %s for %s", self.node, nack.reason.value, nack.name)
        return self._retransmit(entry)

    def on_interest(self, interest: Interest):
        return self.answer(self.store, interest)

    def progress(self) -> dict:
        return {
            "node": self.node,
            "segments": len(self.have_segments),
            "manifests": len(self.have_manifests),
            "packets": len(self.have_packets),
            "expected_packets": self.expected_packets,
            "outstanding": len(self.outstanding),
        }
