import csv

import pytest

from ntorrent_sim.scenarios import build_network, builtin_scenario
from ntorrent_sim.torrent import TorrentParams, build_torrent
from ntorrent_sim.tracing import (
    METRICS_HEADER,
    TRACE_HEADER,
    RateTracer,
    completion_reports,
    read_csv,
    summarize,
    write_csv,
    write_metrics_csv,
)

MS = 1_000_000


def test_idle_intervals_emit_nothing():
    t = RateTracer(100)
    t.record(50 * MS, "a", 1, "OutData", 104)
    t.record(750 * MS, "a", 1, "OutData", 104)
    t.finish()
    assert [(s.time_ms, s.packets) for s in t.samples] == [(100.0, 1), (800.0, 1)]


def test_single_data_packet():
    t = RateTracer(500, ["p", "c"])
    t.record(10 * MS, "p", 1, "OutData", 64 + 40)
    t.record(21 * MS, "c", 1, "InData", 64 + 40)
    rows = [s.row() for s in t.finish()]
    assert rows == [["500.000", "p", "1", "OutData", "1", "0.104"],
                    ["500.000", "c", "1", "InData", "1", "0.104"]]


def test_boundary_belongs_to_next_interval():
    t = RateTracer(500)
    t.record(500 * MS, "a", 1, "InInterests", 30)
    assert t.finish()[0].time_ms == 1000.0


def test_unknown_type_rejected():
    with pytest.raises(ValueError):
        RateTracer(500).record(0, "a", 1, "Sideways", 1)


def test_nonpositive_interval_rejected():
    with pytest.raises(ValueError):
        RateTracer(0)


def run(scenario="ntorrent-simple", **kw):
    net = build_network(builtin_scenario(scenario), **kw)
    report = net.run(60_000)
    assert report.all_completed
    return net


def test_trace_covers_the_whole_torrent():
    net = run()
    bundle = build_torrent(TorrentParams())
    payload = sum(len(d.content) + 40 for d in bundle.all_data())
    got = sum(s.kilobytes for s in net.tracer.samples
              if s.node == "consumer" and s.type == "InData" and s.face_id < 256)
    assert got * 1000 >= payload - 1e-6


def test_csv_round_trip(tmp_path):
    net = run()
    path = tmp_path / "trace.csv"
    write_csv(net.tracer.samples, path)
    with path.open() as fh:
        assert next(csv.reader(fh)) == TRACE_HEADER
    back = read_csv(path)
    assert len(back) == len(net.tracer.samples)
    for a, b in zip(back, net.tracer.samples):
        assert (a.time_ms, a.node, a.face_id, a.type, a.packets) == \
            (b.time_ms, b.node, b.face_id, b.type, b.packets)
        assert a.kilobytes == pytest.approx(b.kilobytes, abs=5e-4)


def test_summarize_rows():
    net = run("multi-consumer")
    rows = {r.node: r for r in summarize(net)}
    assert set(rows) == {"producer", "consumer1", "consumer2", "consumer3"}
    for name in ("consumer1", "consumer2", "consumer3"):
        assert rows[name].isr == 1.0
        assert rows[name].interests_sent == 22
        assert rows[name].avg_delay_ms > 0
    seeder = rows["producer"]
    assert seeder.interests_sent == 0 and seeder.isr is None
    assert seeder.row()[4] == ""


def test_metrics_csv(tmp_path):
    net = run()
    path = tmp_path / "m.csv"
    write_metrics_csv(summarize(net), path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == METRICS_HEADER
    assert lines[1].startswith("producer,seeder,0,0,,,")
    assert lines[2].startswith("consumer,consumer,22,22,1.0,")


def test_completion_reports():
    net = run("router-node-degree-4")
    reps = {r["node"]: r for r in completion_reports(net)}
    assert set(reps) == {"P1", "P2", "P3"}
    assert reps["P3"]["start_ms"] == 6000
    assert all(r["ISR"] == 1.0 and r["finish_ms"] > r["start_ms"] for r in reps.values())


def test_replay_bytes_identical(tmp_path):
    outs = []
    for i in range(2):
        net = run("router-node-degree-3", seed=11)
        path = tmp_path / f"t{i}.csv"
        write_csv(net.tracer.samples, path)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(OSError):
        write_csv([], tmp_path / "missing" / "t.csv")


@pytest.mark.parametrize("scenario", ["fully-connected", "router-node-degree-4"])
def test_per_link_flow_conservation(scenario):
    net = run(scenario)
    totals = net.tracer.totals
    for link in net.links:
        for kind in ("Interests", "Data", "Nacks"):
            for (src, sf), (dst, df) in (((link.node_a, link.face_a), (link.node_b, link.face_b)),
                                         ((link.node_b, link.face_b), (link.node_a, link.face_a))):
                sent = totals.get((src, sf, "Out" + kind), [0, 0])
                got = totals.get((dst, df, "In" + kind), [0, 0])
                assert sent == got
