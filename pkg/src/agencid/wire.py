"""Shared binary encoding helpers.

Every on-disk artifact uses the same conventions: multi-byte integers are
big-endian; variable fields are length-prefixed (4-byte length, then bytes);
index sets are a 4-byte count followed by sorted 4-byte indices.  Key
objects and package files start with a 4-byte magic, a 1-byte version, and a
1-byte backend id.
"""

from __future__ import annotations

import struct
from typing import Sequence, Tuple

from agencid.errors import IntegrityError

__all__ = [
    "VERSION",
    "Reader",
    "pack_header",
    "pack_index_set",
    "pack_lp",
    "unpack_header",
]

VERSION = 0x01

_HEADER = struct.Struct(">4sBBI")


def pack_header(magic: bytes, backend_id: int, n: int, version: int = VERSION) -> bytes:
    return _HEADER.pack(magic, version, backend_id, n)


def unpack_header(raw: bytes, expected_magic: bytes) -> Tuple[int, int, int]:
    """Return (version, backend_id, n); raises IntegrityError on mismatch."""
    if len(raw) < _HEADER.size:
        raise IntegrityError("truncated header")
    magic, version, backend_id, n = _HEADER.unpack_from(raw)
    if magic != expected_magic:
        raise IntegrityError(f"bad magic {magic!r}, expected {expected_magic!r}")
    if version != VERSION:
        raise IntegrityError(f"unsupported format version {version}")
    return version, backend_id, n


HEADER_SIZE = _HEADER.size


def pack_lp(payload: bytes) -> bytes:
    return len(payload).to_bytes(4, "big") + payload


def pack_index_set(indices: Sequence[int]) -> bytes:
    out = [len(indices).to_bytes(4, "big")]
    out.extend(i.to_bytes(4, "big") for i in sorted(indices))
    return b"".join(out)


class Reader:
    """Cursor over a byte string with checked reads."""

    def __init__(self, raw: bytes, offset: int = 0) -> None:
        self._raw = raw
        self._pos = offset

    @property
    def offset(self) -> int:
        return self._pos

    def exhausted(self) -> bool:
        return self._pos == len(self._raw)

    def take(self, count: int) -> bytes:
        end = self._pos + count
        if end > len(self._raw):
            raise IntegrityError("truncated field")
        chunk = self._raw[self._pos : end]
        self._pos = end
        return chunk

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def lp(self) -> bytes:
        return self.take(self.u32())

    def index_set(self) -> Tuple[int, ...]:
        count = self.u32()
        indices = tuple(self.u32() for _ in range(count))
        if list(indices) != sorted(set(indices)):
            raise IntegrityError("index set not sorted and distinct")
        return indices

    def expect_end(self) -> None:
        if not self.exhausted():
            raise IntegrityError(f"{len(self._raw) - self._pos} trailing bytes")
