import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntorrent_sim.packets import Name, append_digest
from ntorrent_sim.torrent import (
    DecodeError,
    InvalidParams,
    NameClass,
    TorrentParams,
    TorrentSegment,
    build_torrent,
    classify_name,
    decode_object,
    encode_object,
)


def enumerate_counts(params):
    """Count objects by walking bytes one at a time (no ceiling arithmetic)."""
    packets_per_file = 0
    filled = params.packet_size_bytes
    for _ in range(params.file_size_bytes):
        if filled == params.packet_size_bytes:
            packets_per_file += 1
            filled = 0
        filled += 1
    manifests = 0
    for _ in range(params.file_count):
        slots = 0
        for _ in range(packets_per_file):
            if slots == 0:
                manifests += 1
                slots = params.names_per_manifest
            slots -= 1
    segments = 0
    slots = 0
    for _ in range(manifests):
        if slots == 0:
            segments += 1
            slots = params.names_per_segment
        slots -= 1
    return packets_per_file * params.file_count, manifests, segments


def test_default_bundle_counts():
    params = TorrentParams(file_count=2, file_size_bytes=512, packet_size_bytes=64,
                           names_per_manifest=4, names_per_segment=2)
    bundle = build_torrent(params)
    assert enumerate_counts(params) == (16, 4, 2)
    assert (len(bundle.packets), len(bundle.manifests), len(bundle.segments)) == (16, 4, 2)
    assert sum(len(p.content) for p in bundle.packets) == 1024


def test_single_object_bundle_has_no_next_pointers():
    bundle = build_torrent(TorrentParams(file_count=1, file_size_bytes=64, packet_size_bytes=64,
                                         names_per_manifest=1, names_per_segment=1))
    assert (len(bundle.packets), len(bundle.manifests), len(bundle.segments)) == (1, 1, 1)
    assert bundle.segments[0].next_segment is None
    assert bundle.manifests[0].next_manifest is None


def test_last_packet_is_truncated():
    bundle = build_torrent(TorrentParams(file_count=1, file_size_bytes=100, packet_size_bytes=64))
    assert [p.content for p in bundle.packets] == [b"A" * 64, b"A" * 36]


def test_names_follow_grammar():
    bundle = build_torrent(TorrentParams())
    assert str(bundle.segments[1].name) == "/NTORRENT/demo/torrent-file/seg=1"
    assert str(bundle.manifests[3].name) == "/NTORRENT/demo/file1/manifest/seg=1"
    assert str(bundle.packets[9].name) == "/NTORRENT/demo/file1/data/pkt=1"


@pytest.mark.parametrize("text, expected", [
    ("/NTORRENT/demo/torrent-file/seg=0", NameClass.TORRENT_SEGMENT),
    ("/NTORRENT/demo/file1/manifest/seg=1/sha256digest=abcd", NameClass.FILE_MANIFEST),
    ("/NTORRENT/demo/file0/data/pkt=7", NameClass.DATA_PACKET),
    ("/other/thing", NameClass.UNKNOWN),
    ("/NTORRENT/demo/file0/data/seg=7", NameClass.UNKNOWN),
    ("/NTORRENT/demo", NameClass.UNKNOWN),
])
def test_classify_name(text, expected):
    assert classify_name(Name.parse(text)) is expected


def test_round_trip_every_object_of_default_bundle():
    bundle = build_torrent(TorrentParams())
    for obj in bundle.segments + bundle.manifests:
        assert decode_object(encode_object(obj)) == obj


def test_round_trip_preserves_absent_next():
    seg = TorrentSegment(Name.parse("/NTORRENT/t/torrent-file/seg=0"), (), None, b"SIG:x")
    assert decode_object(encode_object(seg)).next_segment is None


def test_decode_rejects_truncated_and_garbage():
    raw = encode_object(build_torrent(TorrentParams()).segments[0])
    for cut in (1, 5, len(raw) // 2, len(raw) - 1):
        with pytest.raises(DecodeError):
            decode_object(raw[:cut])
    with pytest.raises(DecodeError):
        decode_object(raw + b"\x00")
    with pytest.raises(DecodeError):
        decode_object(b"X" + raw[1:])
    with pytest.raises(DecodeError):
        decode_object(b"")


@pytest.mark.parametrize("kwargs", [
    {"file_count": 0}, {"file_size_bytes": 0}, {"packet_size_bytes": 0},
    {"names_per_manifest": 0}, {"names_per_segment": -1},
    {"file_size_bytes": 10, "packet_size_bytes": 64},
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParams):
        build_torrent(TorrentParams(**kwargs))


params_st = st.builds(
    TorrentParams,
    file_count=st.integers(1, 4),
    file_size_bytes=st.integers(1, 600),
    packet_size_bytes=st.integers(1, 600),
    names_per_manifest=st.integers(1, 7),
    names_per_segment=st.integers(1, 5),
).filter(lambda p: p.packet_size_bytes <= p.file_size_bytes and p.file_size_bytes // p.packet_size_bytes < 80)


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_bundle_properties(params):
    bundle = build_torrent(params)
    data = {d.name: d for d in bundle.all_data()}
    assert (len(bundle.packets), len(bundle.manifests), len(bundle.segments)) == enumerate_counts(params)

    packet_refs = [n for m in bundle.manifests for n in m.packet_catalog]
    manifest_refs = [n for s in bundle.segments for n in s.manifest_catalog]
    assert len(packet_refs) == len(set(packet_refs)) == len(bundle.packets)
    assert len(manifest_refs) == len(set(manifest_refs)) == len(bundle.manifests)
    assert {n.strip_digest() for n in packet_refs} == {p.name for p in bundle.packets}
    assert sum(len(p.content) for p in bundle.packets) == params.file_count * params.file_size_bytes
    assert all(len(m.packet_catalog) <= params.names_per_manifest for m in bundle.manifests)
    assert all(len(s.manifest_catalog) <= params.names_per_segment for s in bundle.segments)

    # every catalog and pointer digest names the referenced object's content
    for ref in packet_refs + manifest_refs:
        target = data[ref.strip_digest()]
        assert ref == append_digest(target.name, target.content)

    # following next pointers visits everything exactly once
    seen = []
    name = bundle.first_segment_name()
    while name is not None:
        seen.append(name.strip_digest())
        obj = decode_object(data[name.strip_digest()].content)
        assert name == append_digest(obj.name, data[obj.name].content)
        name = obj.next_segment
    assert seen == [s.name for s in bundle.segments]
    for i in range(params.file_count):
        firsts = [m for m in bundle.manifests if m.name[2] == f"file{i}".encode()]
        chain = []
        name = firsts[0].name
        while name is not None:
            chain.append(name.strip_digest())
            name = decode_object(data[name.strip_digest()].content).next_manifest
        assert chain == [m.name for m in firsts]
