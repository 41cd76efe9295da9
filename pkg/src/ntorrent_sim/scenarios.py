"""Builtin scenarios, start schedules and the topology-file loader.

Node numbering for ``router-node-degree-4`` (used in trace files and plots)::

    0 P1   1 P2   2 P3   3 P4 (seeder)   4 R1   5 R2   6 R3   7 R4
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import ConfigError, Network, NodeSpec

DEFAULT_RATE = 1_000_000
DEFAULT_DELAY_MS = 10
BASE_START_MS = 1000


@dataclass
class Scenario:
    name: str
    nodes: list[NodeSpec] = field(default_factory=list)
    links: list[tuple[str, str, float, float]] = field(default_factory=list)

    def node(self, name: str) -> NodeSpec:
        for spec in self.nodes:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def consumers(self) -> list[str]:
        return [n.name for n in self.nodes if n.role == "consumer"]

    def seeders(self) -> list[str]:
        return [n.name for n in self.nodes if n.role == "seeder"]


def _simple(rate, delay):
    return Scenario("ntorrent-simple",
                    [NodeSpec("producer", "seeder"), NodeSpec("consumer", "consumer")],
                    [("producer", "consumer", rate, delay)])


def _multi_consumer(rate, delay):
    nodes = [NodeSpec("producer", "seeder"), NodeSpec("router"),
             NodeSpec("consumer1", "consumer"), NodeSpec("consumer2", "consumer"),
             NodeSpec("consumer3", "consumer")]
    links = [("producer", "router", rate, delay),
             ("router", "consumer1", rate, delay),
             ("router", "consumer2", rate, delay),
             ("consumer1", "consumer3", rate, delay)]
    return Scenario("multi-consumer", nodes, links)


def _fully_connected(rate, delay):
    names = ["producer", "consumer1", "consumer2", "consumer3"]
    nodes = [NodeSpec("producer", "seeder")] + [NodeSpec(n, "consumer") for n in names[1:]]
    links = [(a, b, rate, delay) for i, a in enumerate(names) for b in names[i + 1:]]
    return Scenario("fully-connected", nodes, links)


def _forwarding(rate, delay):
    nodes = [NodeSpec("producer", "seeder"), NodeSpec("R1"), NodeSpec("R2"), NodeSpec("R3"),
             NodeSpec("R4"), NodeSpec("consumer1", "consumer"), NodeSpec("consumer2", "consumer")]
    links = [("producer", "R1", rate, delay),
             ("R1", "R2", rate, delay),
             ("R1", "R3", rate, 2 * delay),
             ("R2", "R4", rate, delay),
             ("R3", "R4", rate, delay),
             ("R4", "consumer1", rate, delay),
             ("R3", "consumer2", rate, delay)]
    return Scenario("forwarding-scenario", nodes, links)


DEGREE4_ROUTER_DELAYS = {("R1", "R2"): 10, ("R1", "R3"): 20, ("R1", "R4"): 30,
                         ("R2", "R3"): 15, ("R2", "R4"): 25, ("R3", "R4"): 10}
DEGREE4_ACCESS_DELAY_MS = 5


def _degree4(rate, delay):
    peers = [NodeSpec("P1", "consumer"), NodeSpec("P2", "consumer"),
             NodeSpec("P3", "consumer"), NodeSpec("P4", "seeder")]
    routers = [NodeSpec(f"R{i}") for i in range(1, 5)]
    links = [(a, b, rate, d) for (a, b), d in DEGREE4_ROUTER_DELAYS.items()]
    links += [(f"P{i}", f"R{i}", rate, DEGREE4_ACCESS_DELAY_MS) for i in range(1, 5)]
    return Scenario("router-node-degree-4", peers + routers, links)


def _degree3(rate, delay):
    peers = [NodeSpec("P1", "seeder")] + [NodeSpec(f"P{i}", "consumer") for i in range(2, 6)]
    routers = [NodeSpec(f"R{i}") for i in range(1, 4)]
    bottleneck = rate / 4
    links = [("R1", "R2", bottleneck, delay), ("R2", "R3", bottleneck, delay),
             ("P1", "R1", rate, delay), ("P2", "R1", rate, delay), ("P3", "R2", rate, delay),
             ("P4", "R3", rate, delay), ("P5", "R3", rate, delay)]
    return Scenario("router-node-degree-3", peers + routers, links)


BUILDERS = {
    "ntorrent-simple": _simple,
    "multi-consumer": _multi_consumer,
    "fully-connected": _fully_connected,
    "forwarding-scenario": _forwarding,
    "router-node-degree-3": _degree3,
    "router-node-degree-4": _degree4,
}
SCENARIOS = tuple(BUILDERS) + ("from-file",)


def builtin_schedules() -> dict[str, dict[str, float]]:
    """Consumer start times (ms) per builtin scenario."""
    out = {}
    for name, build in BUILDERS.items():
        scenario = build(DEFAULT_RATE, DEFAULT_DELAY_MS)
        out[name] = {c: BASE_START_MS for c in scenario.consumers()}
    out["router-node-degree-4"] = {"P1": BASE_START_MS, "P3": BASE_START_MS + 5000,
                                   "P2": BASE_START_MS + 10000}
    return out


def builtin_scenario(name: str, data_rate: float = DEFAULT_RATE,
                     delay_ms: float = DEFAULT_DELAY_MS) -> Scenario:
    try:
        scenario = BUILDERS[name](data_rate, delay_ms)
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}") from None
    for consumer, start in builtin_schedules()[name].items():
        scenario.node(consumer).start_ms = start
    return scenario


_NODE_KEYS = {"name", "role", "start_ms"}
_LINK_KEYS = {"a", "b", "rate", "delay_ms"}


def load_topology_file(path, data_rate: float = DEFAULT_RATE,
                       delay_ms: float = DEFAULT_DELAY_MS) -> Scenario:
    """Read a TOML scenario file.

    ``[[node]]`` tables (name, role, start_ms) declare seeders and consumers;
    nodes that appear only in ``[[link]]`` tables (a, b, rate, delay_ms) are
    routers. Missing link rates and delays fall back to the given defaults.
    """
    try:
        doc = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read topology file {path}: {exc}") from None

    scenario = Scenario("from-file")
    for entry in doc.get("node", []):
        extra = set(entry) - _NODE_KEYS
        if extra or "name" not in entry:
            raise ConfigError(f"bad [[node]] entry {entry!r}")
        scenario.nodes.append(NodeSpec(str(entry["name"]), entry.get("role", "router"),
                                       float(entry.get("start_ms", BASE_START_MS))))
    declared = {n.name for n in scenario.nodes}
    for entry in doc.get("link", []):
        extra = set(entry) - _LINK_KEYS
        if extra or "a" not in entry or "b" not in entry:
            raise ConfigError(f"bad [[link]] entry {entry!r}")
        a, b = str(entry["a"]), str(entry["b"])
        for n in (a, b):
            if n not in declared:
                scenario.nodes.append(NodeSpec(n))
                declared.add(n)
        scenario.links.append((a, b, float(entry.get("rate", data_rate)),
                               float(entry.get("delay_ms", delay_ms))))
    if not scenario.seeders():
        raise ConfigError("topology file declares no seeder")
    return scenario


def build_network(scenario: Scenario, starts: dict[str, float] | None = None,
                  **network_kwargs) -> Network:
    starts = starts or {}
    unknown = set(starts) - {n.name for n in scenario.nodes}
    if unknown:
        raise ConfigError(f"--start names unknown node(s): {', '.join(sorted(unknown))}")
    net = Network(**network_kwargs)
    for spec in scenario.nodes:
        if spec.name in starts:
            if spec.role != "consumer":
                raise ConfigError(f"--start {spec.name}: not a consumer")
            spec = NodeSpec(spec.name, spec.role, starts[spec.name])
        net.create_and_install(spec)
    for a, b, rate, delay in scenario.links:
        net.create_link(a, b, rate, delay)
    return net
