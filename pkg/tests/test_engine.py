import math

import pytest

from ntorrent_sim.engine import ConfigError, InternalError, Link, Network, NodeSpec, Simulator
from ntorrent_sim.packets import Name
from ntorrent_sim.routing import DuplicateLink
from ntorrent_sim.scenarios import build_network, builtin_scenario
from ntorrent_sim.torrent import TorrentParams, build_torrent

MS = 1_000_000


def test_same_timestamp_events_run_in_schedule_order():
    sim = Simulator()
    seen = []
    for i in range(5):
        sim.schedule(10, lambda i=i: seen.append(i))
    sim.schedule(5, lambda: seen.append("early"))
    sim.run()
    assert seen == ["early", 0, 1, 2, 3, 4]
    assert sim.now == 10


def test_cancelled_event_does_not_fire():
    sim = Simulator()
    seen = []
    ev = sim.schedule(3, lambda: seen.append("x"))
    ev.cancel()
    sim.run()
    assert seen == []


def test_empty_run_returns_at_zero():
    assert Simulator().run() == 0
    net = Network()
    assert net.run(1000).end_ms == 0


def test_past_event_is_internal_error():
    sim = Simulator()
    sim.schedule(100, lambda: sim.schedule(50, lambda: None))
    with pytest.raises(InternalError):
        sim.run()


def test_run_stops_at_horizon():
    sim = Simulator()
    sim.schedule(500, lambda: None)
    assert sim.run(until=100) == 100
    assert sim.pending() == 1


def test_nonces_unique():
    sim = Simulator(3)
    nonces = [sim.new_nonce() for _ in range(5000)]
    assert len(set(nonces)) == 5000
    assert all(0 <= n < 2**32 for n in nonces)


def test_link_transmit_timing():
    link = Link(0, "a", 1, "b", 1, 1_000_000, 10 * MS)
    # 64 bytes at 1 Mb/s is 512 us on the wire
    assert link.transmit(0, 64, 0) == 10_512_000
    assert link.transmit(0, 64, 0) == 11_024_000
    # the reverse direction has its own queue
    assert link.transmit(1, 64, 0) == 10_512_000


def test_transmit_rounds_up():
    link = Link(0, "a", 1, "b", 1, 3, 0)
    assert link.transmit(0, 1, 0) == math.ceil(8e9 / 3)


def two_nodes(**kw):
    net = Network(**kw)
    net.add_node("a")
    net.add_node("b")
    return net


def test_zero_rate_rejected():
    net = two_nodes()
    with pytest.raises(ConfigError):
        net.create_link("a", "b", 0, 10)


def test_unknown_node_rejected():
    net = two_nodes()
    with pytest.raises(ConfigError):
        net.create_link("a", "zz", 1e6, 10)


def test_create_link_faces_and_duplicates():
    net = two_nodes()
    net.add_node("c")
    l1 = net.create_link("a", "b", 1e6, 10)
    l2 = net.create_link("a", "c", 1e6, 10)
    assert (l1.face_a, l1.face_b, l2.face_a, l2.face_b) == (1, 1, 2, 1)
    assert net.nodes["a"].face_to == {"b": 1, "c": 2}
    with pytest.raises(DuplicateLink):
        net.create_link("b", "a", 1e6, 10)


def test_app_faces_numbered_apart_from_links():
    net = build_network(builtin_scenario("ntorrent-simple"))
    node = net.nodes["producer"]
    assert list(node.apps) == [256]
    assert node.face_count("link") == 1 and node.face_count("app") == 1


@pytest.mark.parametrize("scenario,degree,routers", [
    ("router-node-degree-4", 4, ["R1", "R2", "R3", "R4"]),
    ("router-node-degree-3", 3, ["R2"]),
])
def test_router_degrees(scenario, degree, routers):
    net = build_network(builtin_scenario(scenario))
    for r in routers:
        assert net.nodes[r].face_count("link") == degree
        assert net.nodes[r].face_count("app") == 0


def test_degree3_ends_have_three_faces():
    net = build_network(builtin_scenario("router-node-degree-3"))
    assert net.nodes["R1"].face_count("link") == 3
    assert net.nodes["R3"].face_count("link") == 3


def test_unknown_role_rejected():
    with pytest.raises(ConfigError):
        Network().create_and_install(NodeSpec("x", "leech"))


def test_first_exchange_timeline():
    """Interest and segment Data timing worked out by hand for one 1 Mb/s, 10 ms hop."""
    net = build_network(builtin_scenario("ntorrent-simple"))
    report = net.run(60_000)
    assert report.all_completed
    seg = build_torrent(TorrentParams()).segment_data[0]
    interest_tx = 30 * 8 * 1000           # ns
    data_tx = (len(seg.content) + 40) * 8 * 1000
    at_producer = 1000 * MS + interest_tx + 10 * MS
    at_consumer = at_producer + data_tx + 10 * MS
    link_events = [e for e in net.events if e[2] < 256]
    first_in_interest = next(e for e in link_events if e[1] == "producer" and e[3] == "In")
    first_in_data = next(e for e in link_events if e[1] == "consumer" and e[4] == "Data")
    assert first_in_interest[0] == at_producer
    assert first_in_data[0] == at_consumer
    assert first_in_data[5] == str(seg.name)


def test_replay_is_deterministic():
    def run():
        net = build_network(builtin_scenario("router-node-degree-4"), seed=7)
        net.run(60_000)
        return net.events
    assert run() == run()


def test_announces_in_one_timestep_coalesce():
    net = build_network(builtin_scenario("ntorrent-simple"))
    net.run(0)
    before = net.recomputes
    node = net.nodes["consumer"]
    app_face = next(iter(node.apps))
    for i in range(16):
        net.announce("consumer", Name.parse(f"/NTORRENT/demo/file0/data/pkt={i}"), app_face)
    net.sim.run(until=net.sim.now)
    assert net.recomputes == before + 1


def test_repeat_announce_is_ignored():
    net = build_network(builtin_scenario("ntorrent-simple"))
    net.run(0)
    name = Name.parse("/NTORRENT/demo/file0/data/pkt=0")
    net.announce("consumer", name, 256)
    net.sim.run(until=net.sim.now)
    count = net.recomputes
    net.announce("consumer", name, 256)
    net.sim.run(until=net.sim.now)
    assert net.recomputes == count


@pytest.mark.parametrize("scenario", ["multi-consumer", "fully-connected", "router-node-degree-4"])
def test_links_deliver_everything_enqueued(scenario):
    net = build_network(builtin_scenario(scenario))
    net.run(60_000)
    for link in net.links:
        assert link.enqueued == link.delivered


def test_hop_counts_bounded_after_announcements():
    net = build_network(builtin_scenario("fully-connected"))
    seen = []
    for node in net.nodes.values():
        original = node.forwarder.on_incoming_interest

        def spy(face, interest, now, original=original):
            seen.append(interest.hop_count)
            return original(face, interest, now)
        node.forwarder.on_incoming_interest = spy
    assert net.run(60_000).all_completed
    assert seen and max(seen) <= len(net.nodes)


def test_data_provenance_annotations():
    net = build_network(builtin_scenario("multi-consumer"))
    net.run(60_000)
    c2 = next(c for c in net.consumers() if c.node == "consumer2")
    for name, (origin, hops) in c2.received_from.items():
        assert origin[2] in ("app", "cs")
        assert hops[-1] == "router"
