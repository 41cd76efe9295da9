"""Command-line scenario runner.

Exit status: 0 every consumer completed, 1 configuration error, 2 run ended
with incomplete consumers.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ConfigError, Network, RunReport
from .routing import DuplicateLink
from .scenarios import (
    DEFAULT_DELAY_MS,
    DEFAULT_RATE,
    SCENARIOS,
    build_network,
    builtin_scenario,
    load_topology_file,
)
from .strategies import STRATEGIES
from .torrent import InvalidParams, TorrentParams
from .tracing import (
    METRICS_HEADER,
    completion_reports,
    summarize,
    write_completions,
    write_csv,
    write_metrics_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_INCOMPLETE = 0, 1, 2


@dataclass
class ScenarioConfig:
    scenario: str = "ntorrent-simple"
    strategy: str = "ntorrent"
    seed: int = 1
    params: TorrentParams = field(default_factory=TorrentParams)
    data_rate: float = DEFAULT_RATE
    delay_ms: float = DEFAULT_DELAY_MS
    trace_interval_ms: float = 500
    max_sim_time_s: float = 60
    starts: dict[str, float] = field(default_factory=dict)
    topology_file: str | None = None
    strict_phase_barrier: bool = False
    router_cache: bool = True
    audit: bool = False
    trace_out: str | None = None
    metrics_out: str | None = None
    plot_out: str | None = None
    dump_tables: str | None = None

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.scenario == "from-file" and not self.topology_file:
            raise ConfigError("scenario from-file needs --topology-file")
        for key in ("data_rate", "delay_ms", "trace_interval_ms", "max_sim_time_s"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key.replace('_', '-')} must be positive")
        if any(v < 0 for v in self.starts.values()):
            raise ConfigError("start times must be non-negative")
        try:
            self.params.validate()
        except InvalidParams as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ScenarioResult:
    status: int
    report: RunReport
    network: Network


def build(config: ScenarioConfig) -> Network:
    config.validate()
    if config.scenario == "from-file":
        scenario = load_topology_file(config.topology_file, config.data_rate, config.delay_ms)
    else:
        scenario = builtin_scenario(config.scenario, config.data_rate, config.delay_ms)
    try:
        return build_network(
            scenario, config.starts, params=config.params, strategy=config.strategy,
            seed=config.seed, trace_interval_ms=config.trace_interval_ms,
            router_cache=config.router_cache, audit=config.audit,
            strict_phase_barrier=config.strict_phase_barrier,
        )
    except DuplicateLink as exc:
        raise ConfigError(f"duplicate link {exc}") from None


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Build, run and write every requested artifact."""
    network = build(config)
    report = network.run(config.max_sim_time_s * 1000)
    rows = summarize(network)
    samples = network.tracer.samples

    if config.trace_out:
        write_csv(samples, config.trace_out)
    if config.metrics_out:
        write_metrics_csv(rows, config.metrics_out)
        write_completions(completion_reports(network), completions_path(config.metrics_out))
    if config.plot_out:
        from .plotting import plot_rates

        plot_rates(samples, config.plot_out, config.trace_interval_ms,
                   node_order=list(network.nodes),
                   title=f"{config.scenario} / {config.strategy}")
    if config.dump_tables:
        lines = "".join(json.dumps(t) + "\n" for t in network.dump_tables())
        if config.dump_tables == "-":
            sys.stdout.write(lines)
        else:
            Path(config.dump_tables).write_text(lines)

    status = EXIT_OK if report.all_completed else EXIT_INCOMPLETE
    return ScenarioResult(status, report, network)


def completions_path(metrics_out) -> Path:
    path = Path(metrics_out)
    return path.with_name(path.stem + ".completions.jsonl")


_RATE_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([kmg]?)(?:b(?:ps|/s)?)?\s*$", re.I)


def parse_rate(text: str) -> float:
    """Bits per second from ``1000000``, ``1Mbps``, ``256kbps`` and the like."""
    m = _RATE_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad data rate {text!r}")
    scale = {"": 1, "k": 1e3, "m": 1e6, "g": 1e9}[m.group(2).lower()]
    return float(m.group(1)) * scale


def parse_start(text: str) -> tuple[str, float]:
    node, sep, value = text.partition("=")
    if not sep or not node:
        raise argparse.ArgumentTypeError(f"expected <peer>=<ms>, got {text!r}")
    try:
        return node, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad start time in {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ntorrent-sim",
                description="Simulate nTorrent file distribution over an NDN network.")
    p.add_argument("--scenario", choices=SCENARIOS, default="ntorrent-simple")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), default="ntorrent")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--file-count", type=int, default=2)
    p.add_argument("--file-size", type=int, default=512, help="bytes per file")
    p.add_argument("--packet-size", type=int, default=64, help="bytes per data packet")
    p.add_argument("--names-per-manifest", type=int, default=4)
    p.add_argument("--names-per-segment", type=int, default=2)
    p.add_argument("--torrent-name", default="demo")
    p.add_argument("--data-rate", type=parse_rate, default=DEFAULT_RATE,
                   help="default link rate, bits/s (suffixes k/M/G accepted)")
    p.add_argument("--delay-ms", type=float, default=DEFAULT_DELAY_MS,
                   help="default link delay for links the scenario does not pin")
    p.add_argument("--trace-out", help="rate trace CSV path")
    p.add_argument("--metrics-out", help="per-node metrics CSV path (stdout when omitted)")
    p.add_argument("--plot-out", help="render the rate trace figure to this file")
    p.add_argument("--trace-interval-ms", type=float, default=500)
    p.add_argument("--max-sim-time", type=float, default=60, help="simulated seconds")
    p.add_argument("--strict-phase-barrier", action="store_true",
                   help="fetch every torrent-file segment before any manifest")
    p.add_argument("--no-router-cache", action="store_true",
                   help="disable Content Stores on routers")
    p.add_argument("--dump-tables", nargs="?", const="-", metavar="PATH",
                   help="write CS/PIT/FIB per node as JSON lines (stdout by default)")
    p.add_argument("--topology-file", help="TOML scenario for --scenario from-file")
    p.add_argument("--start", type=parse_start, action="append", default=[],
                   metavar="PEER=MS", help="override a consumer's start time")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def config_from_args(args) -> ScenarioConfig:
    params = TorrentParams(args.torrent_name, args.file_count, args.file_size,
                           args.packet_size, args.names_per_manifest, args.names_per_segment)
    return ScenarioConfig(
        scenario=args.scenario, strategy=args.strategy, seed=args.seed, params=params,
        data_rate=args.data_rate, delay_ms=args.delay_ms,
        trace_interval_ms=args.trace_interval_ms, max_sim_time_s=args.max_sim_time,
        starts=dict(args.start), topology_file=args.topology_file,
        strict_phase_barrier=args.strict_phase_barrier,
        router_cache=not args.no_router_cache, trace_out=args.trace_out,
        metrics_out=args.metrics_out, plot_out=args.plot_out, dump_tables=args.dump_tables,
    )


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        result = run_scenario(config)
    except (ConfigError, InvalidParams) as exc:
        print(f"ntorrent-sim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ntorrent-sim: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if not config.metrics_out:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        writer.writerows(r.row() for r in summarize(result.network))

    if result.status == EXIT_INCOMPLETE:
        print(f"ntorrent-sim: incomplete at {result.report.end_ms:.3f} ms", file=sys.stderr)
        for failure in result.report.failures:
            print(f"  failure: {failure}", file=sys.stderr)
        for consumer in result.network.consumers():
            if not consumer.completed:
                print("  " + json.dumps(consumer.progress()), file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
