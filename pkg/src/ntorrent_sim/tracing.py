"""Per-face packet rate tracing and end-of-run metric summaries.

Rate trace CSV (one row per node/face/type per interval with activity)::

    time_ms,node,face,type,packets,kilobytes

``time_ms`` is the end of the interval; ``kilobytes`` counts wire bytes
(content plus header) / 1000.

Metrics CSV (one row per application node)::

    node,role,interests_sent,interests_satisfied,isr,avg_delay_ms,finish_ms

Undefined ratios are written as empty cells.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .strategies import average_delay, interest_satisfaction_rate

NS_PER_MS = 1_000_000

TYPES = ("InInterests", "OutInterests", "InData", "OutData", "InNacks", "OutNacks")
TRACE_HEADER = ["time_ms", "node", "face", "type", "packets", "kilobytes"]
METRICS_HEADER = ["node", "role", "interests_sent", "interests_satisfied", "isr",
                  "avg_delay_ms", "finish_ms"]


@dataclass(frozen=True)
class RateSample:
    time_ms: float
    node: str
    face_id: int
    type: str
    packets: int
    kilobytes: float

    def row(self) -> list[str]:
        return [f"{self.time_ms:.3f}", self.node, str(self.face_id), self.type,
                str(self.packets), f"{self.kilobytes:.3f}"]


class RateTracer:
    """Accumulates per-interval counters; intervals are flushed lazily."""

    def __init__(self, interval_ms: float = 500, node_order: list[str] | None = None):
        if interval_ms <= 0:
            raise ValueError("trace interval must be positive")
        self.interval_ns = int(round(interval_ms * NS_PER_MS))
        self.node_order = node_order if node_order is not None else []
        self.samples: list[RateSample] = []
        self.totals: dict[tuple[str, int, str], list[int]] = defaultdict(lambda: [0, 0])
        self._counts: dict[tuple[str, int, str], list[int]] = defaultdict(lambda: [0, 0])
        self._interval_end = self.interval_ns

    def record(self, now: int, node: str, face_id: int, kind: str, size_bytes: int) -> None:
        if kind not in TYPES:
            raise ValueError(f"unknown trace type {kind!r}")
        if now >= self._interval_end:
            self.sample(self._interval_end)
            skipped = (now - self._interval_end) // self.interval_ns
            self._interval_end += (skipped + 1) * self.interval_ns
        key = (node, face_id, kind)
        counter = self._counts[key]
        counter[0] += 1
        counter[1] += size_bytes
        total = self.totals[key]
        total[0] += 1
        total[1] += size_bytes

    def _sort_key(self, key):
        node, face, kind = key
        rank = self.node_order.index(node) if node in self.node_order else len(self.node_order)
        return (rank, node, face, TYPES.index(kind))

    def sample(self, now: int) -> list[RateSample]:
        """Emit rows for the counters accumulated so far and reset them."""
        out = []
        for key in sorted(self._counts, key=self._sort_key):
            packets, size = self._counts[key]
            if packets:
                out.append(RateSample(now / NS_PER_MS, key[0], key[1], key[2], packets, size / 1000))
        self._counts.clear()
        self.samples.extend(out)
        return out

    def finish(self) -> list[RateSample]:
        if self._counts:
            self.sample(self._interval_end)
        return self.samples


def write_csv(samples, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for s in samples:
            writer.writerow(s.row())


def read_csv(path) -> list[RateSample]:
    with Path(path).open(newline="") as fh:
        return [RateSample(float(r["time_ms"]), r["node"], int(r["face"]), r["type"],
                           int(r["packets"]), float(r["kilobytes"]))
                for r in csv.DictReader(fh)]


def _fmt(value, digits=3):
    return "" if value is None else f"{value:.{digits}f}"


@dataclass(frozen=True)
class MetricsRow:
    node: str
    role: str
    interests_sent: int
    interests_satisfied: int
    isr: float | None
    avg_delay_ms: float | None
    finish_ms: float | None

    def row(self) -> list[str]:
        isr = "" if self.isr is None else repr(float(self.isr))
        return [self.node, self.role, str(self.interests_sent), str(self.interests_satisfied),
                isr, _fmt(self.avg_delay_ms), _fmt(self.finish_ms)]


def summarize(network) -> list[MetricsRow]:
    rows = []
    for node in network.nodes.values():
        for app in node.apps.values():
            metrics = getattr(app, "metrics", None)
            if metrics is None:
                rows.append(MetricsRow(node.name, app.role, 0, 0, None, None, None))
                continue
            finish = getattr(app, "finish_ns", None)
            rows.append(MetricsRow(
                node.name, app.role, metrics.interests_sent, metrics.interests_satisfied,
                interest_satisfaction_rate(metrics), average_delay(metrics),
                None if finish is None else finish / NS_PER_MS,
            ))
    return rows


def write_metrics_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow(r.row())


def completion_reports(network) -> list[dict]:
    out = []
    for node in network.nodes.values():
        for app in node.apps.values():
            if app.role != "consumer":
                continue
            isr = interest_satisfaction_rate(app.metrics)
            delay = average_delay(app.metrics)
            out.append({
                "node": node.name,
                "start_ms": app.start_ms,
                "finish_ms": None if app.finish_ns is None else app.finish_ns / NS_PER_MS,
                "interests_sent": app.metrics.interests_sent,
                "ISR": isr,
                "avg_delay_ms": None if delay is None else round(delay, 6),
            })
    return out


def write_completions(reports, path) -> None:
    with Path(path).open("w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep, sort_keys=True) + "\n")
