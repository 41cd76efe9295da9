"""NDN packet vocabulary: names, Interests, Data and Nacks."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from urllib.parse import quote, unquote_to_bytes

DIGEST_PREFIX = b"sha256digest="
DEFAULT_LIFETIME_MS = 4000

# printable ASCII minus the separator and the escape character
_SAFE = "".join(chr(c) for c in range(0x21, 0x7F) if chr(c) not in "/%")


class EmptyName(ValueError):
    pass


@dataclass(frozen=True)
class Name:
    components: tuple[bytes, ...] = ()

    def __post_init__(self):
        comps = tuple(c.encode() if isinstance(c, str) else bytes(c) for c in self.components)
        if any(not c for c in comps):
            raise ValueError("name components must be non-empty")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, text: str) -> Name:
        parts = [p for p in text.split("/") if p]
        if not parts:
            raise EmptyName(text)
        return cls(tuple(unquote_to_bytes(p) for p in parts))

    @classmethod
    def of(cls, *components) -> Name:
        return cls(tuple(components))

    def __str__(self) -> str:
        return render_name(self)

    def __repr__(self) -> str:
        return f"Name({render_name(self) if self.components else ''!r})"

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Name(self.components[index])
        return self.components[index]

    def __lt__(self, other: Name) -> bool:
        return self.components < other.components

    def append(self, component) -> Name:
        return Name(self.components + (component,))

    def is_prefix_of(self, other: Name) -> bool:
        return is_prefix_of(self, other)

    @property
    def digest(self) -> str | None:
        """Hex digest carried by the final component, if any."""
        if self.components and self.components[-1].startswith(DIGEST_PREFIX):
            return self.components[-1][len(DIGEST_PREFIX):].decode("ascii")
        return None

    def strip_digest(self) -> Name:
        comps = self.components
        while comps and comps[-1].startswith(DIGEST_PREFIX):
            comps = comps[:-1]
        return Name(comps)


def render_name(name: Name) -> str:
    if not name.components:
        raise EmptyName("cannot render an empty name")
    return "".join("/" + quote(c, safe=_SAFE) for c in name.components)


def is_prefix_of(prefix: Name, name: Name) -> bool:
    n = len(prefix.components)
    return n <= len(name.components) and name.components[:n] == prefix.components


def sha256_hex(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


def append_digest(name: Name, content: bytes) -> Name:
    return name.append(DIGEST_PREFIX + sha256_hex(content).encode("ascii"))


@dataclass(frozen=True)
class Interest:
    name: Name
    nonce: int
    lifetime_ms: int = DEFAULT_LIFETIME_MS
    hop_count: int = 0

    def __post_init__(self):
        if not self.name.components:
            raise EmptyName("interest name is empty")
        if not 0 <= self.nonce < 2**32:
            raise ValueError(f"nonce out of 32-bit range: {self.nonce}")
        if self.lifetime_ms <= 0:
            raise ValueError("lifetime must be positive")
        if self.hop_count < 0:
            raise ValueError("hop_count must be non-negative")


@dataclass(frozen=True)
class Data:
    """A named content object.

    ``origin`` and ``hops`` are simulator annotations: where the copy was
    produced (node, face id, ``"app"`` or ``"cs"``) and which nodes forwarded
    it. They take no part in equality.
    """

    name: Name
    content: bytes
    publisher_signature: bytes = b""
    sha256: bytes = field(init=False)
    origin: tuple | None = field(default=None, compare=False, repr=False)
    hops: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.name.components:
            raise EmptyName("data name is empty")
        object.__setattr__(self, "sha256", hashlib.sha256(self.content).digest())

    @property
    def digest_hex(self) -> str:
        return self.sha256.hex()

    def matches(self, name: Name) -> bool:
        """Digest-aware match of this Data against an interest name."""
        if name == self.name:
            return True
        want = name.digest
        return want is not None and name.strip_digest() == self.name and want == self.digest_hex


class NackReason(enum.Enum):
    NO_ROUTE = "NoRoute"
    NO_CONTENT = "NoContent"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class Nack:
    name: Name
    nonce: int
    reason: NackReason


def wire_size(packet) -> int:
    """Bytes on the wire: content plus a fixed header."""
    if isinstance(packet, Data):
        return len(packet.content) + 40
    return 30
