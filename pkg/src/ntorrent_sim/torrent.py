"""Torrent data model: torrent-file segments, file manifests and data packets.

Naming grammar::

    /NTORRENT/<torrent>/torrent-file/seg=<k>
    /NTORRENT/<torrent>/file<i>/manifest/seg=<m>
    /NTORRENT/<torrent>/file<i>/data/pkt=<p>

Segment and manifest objects travel as Data content using a length-prefixed
record (all integers big-endian)::

    tag        1 byte   b"S" segment, b"M" manifest
    name       NAME
    catalog    u32 count, then count x NAME
    next       u8 flag (0 absent, 1 present), then NAME if present
    signature  u32 length, then bytes

    NAME := u16 component count, then per component u32 length + bytes
"""

from __future__ import annotations

import enum
import math
import re
import struct
from dataclasses import dataclass, field

from .packets import Data, Name, append_digest

PREFIX = b"NTORRENT"
FILLER = b"A"


class InvalidParams(ValueError):
    pass


class DecodeError(ValueError):
    pass


class NameClass(enum.Enum):
    TORRENT_SEGMENT = "TorrentSegment"
    FILE_MANIFEST = "FileManifest"
    DATA_PACKET = "DataPacket"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class TorrentParams:
    torrent_name: str = "demo"
    file_count: int = 2
    file_size_bytes: int = 512
    packet_size_bytes: int = 64
    names_per_manifest: int = 4
    names_per_segment: int = 2
    publisher: str = "seeder"

    def validate(self) -> None:
        for key in ("file_count", "file_size_bytes", "packet_size_bytes",
                    "names_per_manifest", "names_per_segment"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise InvalidParams(f"{key} must be a positive integer, got {value!r}")
        if self.packet_size_bytes > self.file_size_bytes:
            raise InvalidParams("packet_size_bytes must not exceed file_size_bytes")
        if not self.torrent_name or "/" in self.torrent_name:
            raise InvalidParams(f"bad torrent name {self.torrent_name!r}")

    @property
    def packets_per_file(self) -> int:
        return math.ceil(self.file_size_bytes / self.packet_size_bytes)

    @property
    def packet_count(self) -> int:
        return self.file_count * self.packets_per_file

    @property
    def signature(self) -> bytes:
        return f"SIG:{self.publisher}".encode()


@dataclass(frozen=True)
class TorrentSegment:
    name: Name
    manifest_catalog: tuple[Name, ...]
    next_segment: Name | None = None
    publisher_signature: bytes = b""


@dataclass(frozen=True)
class FileManifest:
    name: Name
    packet_catalog: tuple[Name, ...]
    next_manifest: Name | None = None
    publisher_signature: bytes = b""


@dataclass
class TorrentBundle:
    params: TorrentParams
    segments: list[TorrentSegment] = field(default_factory=list)
    manifests: list[FileManifest] = field(default_factory=list)
    packets: list[Data] = field(default_factory=list)
    segment_data: list[Data] = field(default_factory=list)
    manifest_data: list[Data] = field(default_factory=list)

    def all_data(self) -> list[Data]:
        return self.segment_data + self.manifest_data + self.packets

    def store(self) -> dict[Name, Data]:
        return {d.name: d for d in self.all_data()}

    def first_segment_name(self) -> Name:
        """Full (digest-bearing) name of torrent-file segment 0."""
        d = self.segment_data[0]
        return append_digest(d.name, d.content)


def torrent_prefix(torrent_name: str) -> Name:
    return Name((PREFIX, torrent_name.encode()))


def segment_name(torrent_name: str, k: int) -> Name:
    return torrent_prefix(torrent_name).append(b"torrent-file").append(f"seg={k}".encode())


def manifest_name(torrent_name: str, file_index: int, m: int) -> Name:
    return Name(torrent_prefix(torrent_name).components
                + (f"file{file_index}".encode(), b"manifest", f"seg={m}".encode()))


def packet_name(torrent_name: str, file_index: int, p: int) -> Name:
    return Name(torrent_prefix(torrent_name).components
                + (f"file{file_index}".encode(), b"data", f"pkt={p}".encode()))


def _chunks(seq, size):
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def build_torrent(params: TorrentParams) -> TorrentBundle:
    params.validate()
    t = params.torrent_name
    sig = params.signature
    bundle = TorrentBundle(params)

    # objects are built back to front: a next-pointer carries the digest of
    # the object it points to
    all_manifest_full: list[Name] = []
    for i in range(params.file_count):
        remaining = params.file_size_bytes
        full_names = []
        for p in range(params.packets_per_file):
            size = min(params.packet_size_bytes, remaining)
            remaining -= size
            data = Data(packet_name(t, i, p), FILLER * size, sig)
            bundle.packets.append(data)
            full_names.append(append_digest(data.name, data.content))

        groups = _chunks(full_names, params.names_per_manifest)
        file_manifests = []
        nxt = None
        for m in reversed(range(len(groups))):
            manifest = FileManifest(manifest_name(t, i, m), tuple(groups[m]), nxt, sig)
            data = Data(manifest.name, encode_object(manifest), sig)
            file_manifests.append((manifest, data))
            nxt = append_digest(data.name, data.content)
        file_manifests.reverse()
        for manifest, data in file_manifests:
            bundle.manifests.append(manifest)
            bundle.manifest_data.append(data)
            all_manifest_full.append(append_digest(data.name, data.content))

    groups = _chunks(all_manifest_full, params.names_per_segment)
    built = []
    nxt = None
    for k in reversed(range(len(groups))):
        segment = TorrentSegment(segment_name(t, k), tuple(groups[k]), nxt, sig)
        data = Data(segment.name, encode_object(segment), sig)
        built.append((segment, data))
        nxt = append_digest(data.name, data.content)
    built.reverse()
    bundle.segments = [s for s, _ in built]
    bundle.segment_data = [d for _, d in built]
    return bundle


_SEGMENT_RE = re.compile(rb"seg=\d+")
_PACKET_RE = re.compile(rb"pkt=\d+")
_FILE_RE = re.compile(rb"file\d+")


def classify_name(name: Name) -> NameClass:
    c = name.strip_digest().components
    if len(c) < 4 or c[0] != PREFIX:
        return NameClass.UNKNOWN
    if len(c) == 4 and c[2] == b"torrent-file" and _SEGMENT_RE.fullmatch(c[3]):
        return NameClass.TORRENT_SEGMENT
    if len(c) == 5 and _FILE_RE.fullmatch(c[2]):
        if c[3] == b"manifest" and _SEGMENT_RE.fullmatch(c[4]):
            return NameClass.FILE_MANIFEST
        if c[3] == b"data" and _PACKET_RE.fullmatch(c[4]):
            return NameClass.DATA_PACKET
    return NameClass.UNKNOWN


def _pack_name(name: Name) -> bytes:
    out = [struct.pack(">H", len(name.components))]
    for comp in name.components:
        out.append(struct.pack(">I", len(comp)))
        out.append(comp)
    return b"".join(out)


def encode_object(obj: TorrentSegment | FileManifest) -> bytes:
    if isinstance(obj, TorrentSegment):
        tag, catalog, nxt = b"S", obj.manifest_catalog, obj.next_segment
    elif isinstance(obj, FileManifest):
        tag, catalog, nxt = b"M", obj.packet_catalog, obj.next_manifest
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")
    parts = [tag, _pack_name(obj.name), struct.pack(">I", len(catalog))]
    parts.extend(_pack_name(n) for n in catalog)
    if nxt is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(_pack_name(nxt))
    parts.append(struct.pack(">I", len(obj.publisher_signature)))
    parts.append(obj.publisher_signature)
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise DecodeError("truncated record")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def name(self) -> Name:
        count = self.unpack(">H")
        comps = tuple(self.take(self.unpack(">I")) for _ in range(count))
        try:
            return Name(comps)
        except ValueError as exc:
            raise DecodeError(str(exc)) from None


def decode_object(buf: bytes) -> TorrentSegment | FileManifest:
    r = _Reader(buf)
    tag = r.take(1)
    if tag not in (b"S", b"M"):
        raise DecodeError(f"unknown record tag {tag!r}")
    name = r.name()
    catalog = tuple(r.name() for _ in range(r.unpack(">I")))
    flag = r.unpack(">B")
    if flag not in (0, 1):
        raise DecodeError(f"bad next-pointer flag {flag}")
    nxt = r.name() if flag else None
    sig = r.take(r.unpack(">I"))
    if r.pos != len(buf):
        raise DecodeError("trailing bytes after record")
    if tag == b"S":
        return TorrentSegment(name, catalog, nxt, sig)
    return FileManifest(name, catalog, nxt, sig)
