"""Forwarding strategies and the satisfaction/delay metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .forwarder import NoViableHop, NS_PER_MS

log = logging.getLogger(__name__)


@dataclass
class FaceDelay:
    count: int = 0
    mean: float = 0.0

    def add(self, sample_ms: float) -> None:
        self.count += 1
        self.mean += (sample_ms - self.mean) / self.count


@dataclass
class Metrics:
    interests_sent: int = 0
    interests_satisfied: int = 0
    delay_sum_ns: int = 0
    delay_count: int = 0

    def record_sent(self) -> None:
        self.interests_sent += 1

    def record_satisfied(self, delay_ns: int) -> None:
        self.interests_satisfied += 1
        self.delay_sum_ns += delay_ns
        self.delay_count += 1


def interest_satisfaction_rate(metrics: Metrics) -> float | None:
    """Satisfied over sent; ``None`` when nothing was sent."""
    if metrics.interests_sent < 1:
        return None
    return metrics.interests_satisfied / metrics.interests_sent


def average_delay(metrics: Metrics) -> float | None:
    """Mean interest-to-data delay in milliseconds; ``None`` without samples."""
    if metrics.delay_count < 1:
        return None
    return metrics.delay_sum_ns / metrics.delay_count / NS_PER_MS


def rank_nexthops(face_delay: dict[int, FaceDelay], fib_nexthops: list[int]) -> list[int]:
    """Order next hops for forwarding.

    Faces with no delay sample come first, in FIB order, so every hop is
    tried at least once. Sampled faces follow by ascending mean delay, ties
    broken by face id.
    """
    unsampled = [f for f in fib_nexthops if f not in face_delay or face_delay[f].count == 0]
    sampled = [f for f in fib_nexthops if f in face_delay and face_delay[f].count > 0]
    sampled.sort(key=lambda f: (face_delay[f].mean, f))
    return unsampled + sampled


def client_control_choose(nexthops: list[tuple[int, float]]) -> int:
    if not nexthops:
        raise NoViableHop("empty next-hop list")
    return min(nexthops, key=lambda fc: (fc[1], fc[0]))[0]


class Strategy:
    name = "base"

    def after_receive_interest(self, interest, in_face, pit_entry, fib_entry, now) -> list[int]:
        raise NotImplementedError

    def before_satisfy_interest(self, pit_entry, in_face_of_data, data, now) -> None:
        pass

    def retry_after_nack(self, pit_entry, fib_entry, now) -> list[int]:
        return []


class NTorrentStrategy(Strategy):
    """Delay-ranked single-path forwarding.

    Arrivals are remembered per interest name; when the matching Data comes
    back the elapsed time is credited to the face the Data arrived on.
    """

    name = "ntorrent"

    def __init__(self):
        self.pending_arrivals: dict = {}
        self.face_delay: dict[int, FaceDelay] = {}
        self.samples: dict[int, list[float]] = {}
        self.stale = 0

    def _candidates(self, pit_entry, fib_entry, exclude=()):
        return [f for f in fib_entry.faces() if f not in pit_entry.in_faces and f not in exclude]

    def after_receive_interest(self, interest, in_face, pit_entry, fib_entry, now):
        candidates = self._candidates(pit_entry, fib_entry)
        if not candidates:
            raise NoViableHop(str(interest.name))
        self.pending_arrivals[pit_entry.name] = (in_face, now)
        return rank_nexthops(self.face_delay, candidates)

    def before_satisfy_interest(self, pit_entry, in_face_of_data, data, now):
        record = self.pending_arrivals.pop(pit_entry.name, None)
        if record is None:
            self.stale += 1
            log.debug("no arrival record for %s", pit_entry.name)
            return
        delay_ms = (now - record[1]) / NS_PER_MS
        self.face_delay.setdefault(in_face_of_data, FaceDelay()).add(delay_ms)
        self.samples.setdefault(in_face_of_data, []).append(delay_ms)

    def retry_after_nack(self, pit_entry, fib_entry, now):
        return rank_nexthops(self.face_delay, self._candidates(pit_entry, fib_entry, pit_entry.tried))


class ClientControlStrategy(Strategy):
    """Static best route: always the lowest-cost next hop, no retries."""

    name = "client-control"

    def after_receive_interest(self, interest, in_face, pit_entry, fib_entry, now):
        hops = [(f, c) for f, c in fib_entry.nexthops if f not in pit_entry.in_faces]
        return [client_control_choose(hops)]


STRATEGIES = {
    NTorrentStrategy.name: NTorrentStrategy,
    ClientControlStrategy.name: ClientControlStrategy,
}


def make_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}") from None
