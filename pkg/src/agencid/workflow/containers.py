"""Self-describing package files binding sealed payloads to their keys.

Layout: header, length-prefixed key blob, sealed payload wire form.  The
exact header bytes are the AEAD associated data, so changing the vendor,
cluster, package id, or index set breaks payload authentication even
before any structural check notices.

header = magic "AGID" | version | backend_id | lp(vendor_id) |
         lp(cluster_id) | lp(package_id) | index_set(S)

The key blob is a serialized KeyCiphertext for cluster packages, or a
serialized per-board WrappedKey when backend_id carries the baseline
marker bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from agencid.errors import IntegrityError
from agencid.hybrid import SealedPayload, pack_sealed, unpack_sealed
from agencid.pairing.base import IEID_WIRE_FLAG
from agencid.wire import VERSION, Reader, pack_index_set, pack_lp

__all__ = [
    "EncryptedPackage",
    "MAGIC_PACKAGE",
    "PackageHeader",
    "deserialize_package",
    "serialize_package",
]

MAGIC_PACKAGE = b"AGID"


@dataclass(frozen=True)
class PackageHeader:
    backend_id: int
    vendor_id: str
    cluster_id: str
    package_id: str
    cluster: Tuple[int, ...]

    @property
    def is_ieid(self) -> bool:
        return bool(self.backend_id & IEID_WIRE_FLAG)

    def to_bytes(self) -> bytes:
        return (
            MAGIC_PACKAGE
            + bytes([VERSION, self.backend_id])
            + pack_lp(self.vendor_id.encode())
            + pack_lp(self.cluster_id.encode())
            + pack_lp(self.package_id.encode())
            + pack_index_set(self.cluster)
        )


@dataclass(frozen=True)
class EncryptedPackage:
    header: PackageHeader
    key_blob: bytes
    sealed: SealedPayload

    @property
    def aad(self) -> bytes:
        return self.header.to_bytes()


def serialize_package(pkg: EncryptedPackage) -> bytes:
    return pkg.aad + pack_lp(pkg.key_blob) + pack_sealed(pkg.sealed)


def deserialize_package(raw: bytes) -> EncryptedPackage:
    """Parse a package file; every malformation maps to IntegrityError."""
    try:
        r = Reader(raw)
        magic = r.take(4)
        if magic != MAGIC_PACKAGE:
            raise IntegrityError(f"bad package magic {magic!r}")
        version, backend_id = r.take(1)[0], r.take(1)[0]
        if version != VERSION:
            raise IntegrityError(f"unsupported package version {version}")
        vendor_id = r.lp().decode()
        cluster_id = r.lp().decode()
        package_id = r.lp().decode()
        cluster = r.index_set()
        header = PackageHeader(
            backend_id=backend_id,
            vendor_id=vendor_id,
            cluster_id=cluster_id,
            package_id=package_id,
            cluster=cluster,
        )
        aad = raw[: r.offset]
        if header.to_bytes() != aad:
            raise IntegrityError("package header is not canonical")
        key_blob = r.lp()
        sealed = unpack_sealed(raw[r.offset :], aad)
    except IntegrityError:
        raise
    except (ValueError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"malformed package: {exc}") from exc
    return EncryptedPackage(header=header, key_blob=key_blob, sealed=sealed)
