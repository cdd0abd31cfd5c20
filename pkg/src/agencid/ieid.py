"""Per-board baseline: individual encryption, individual decryption.

Each board owns its own keypair in the same bilinear group, and every
package is wrapped and sealed once per board, so a cluster of n boards
costs n key wraps and n payload seals against the aggregate scheme's one
of each.  The wrap is a plain Diffie-Hellman-style encapsulation built
from the pairing (one pairing per wrap and per unwrap), standing in for
whatever per-board primitive a deployment would use; the benchmark's claim
is about operation multiplicity, not the primitive's constant factor.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

from agencid.errors import IntegrityError, KeyMismatchError
from agencid.hybrid import SealedPayload, SessionSecret, derive_key, open_sealed, seal
from agencid.pairing.base import (
    IEID_WIRE_FLAG,
    PairingEngine,
    Scalar,
    SourceElement,
)
from agencid.wire import HEADER_SIZE, Reader, pack_header, pack_lp, unpack_header

__all__ = [
    "IeidKeyPair",
    "IeidPackage",
    "MAGIC_WRAPPED_KEY",
    "WrappedKey",
    "deserialize_wrapped_key",
    "ieid_decrypt",
    "ieid_encrypt_all",
    "ieid_keygen",
    "serialize_wrapped_key",
    "unwrap_key",
    "wrap_key",
]

MAGIC_WRAPPED_KEY = b"AGIW"


@dataclass(frozen=True)
class IeidKeyPair:
    """Per-board wrapping keypair: secret x, public x * g."""

    index: int
    secret: Scalar
    public: SourceElement


@dataclass(frozen=True)
class WrappedKey:
    """Encapsulation for one board: c = u * g; the board index rides along."""

    index: int
    c: SourceElement


@dataclass(frozen=True)
class IeidPackage:
    """One board's share of an individually encrypted payload."""

    index: int
    wrapped: WrappedKey
    sealed: SealedPayload


def ieid_keygen(
    engine: PairingEngine, indices: Iterable[int], rng: random.Random
) -> Tuple[IeidKeyPair, ...]:
    """One keypair per board index; n keypairs for n boards."""
    pairs = []
    for i in sorted(set(indices)):
        x = engine.random_nonzero_scalar(rng)
        pairs.append(
            IeidKeyPair(index=i, secret=x, public=engine.scalar_mul(x, engine.generator()))
        )
    return tuple(pairs)


def wrap_key(
    engine: PairingEngine, public: SourceElement, index: int, rng: random.Random
) -> Tuple[SessionSecret, WrappedKey]:
    """Encapsulate a fresh session secret to one board.

    shared = pair(public, g)^u with transmitted c = u * g; the board
    recomputes shared = pair(c, g)^x.  One pairing per wrap.
    """
    u = engine.random_nonzero_scalar(rng)
    c = engine.scalar_mul(u, engine.generator())
    shared = engine.gt_scale(u, engine.pair(public, engine.generator()))
    engine.counters.wraps += 1
    return SessionSecret(shared), WrappedKey(index=index, c=c)


def unwrap_key(
    engine: PairingEngine, keypair: IeidKeyPair, wrapped: WrappedKey
) -> SessionSecret:
    if keypair.index != wrapped.index:
        raise KeyMismatchError(
            f"wrapped key targets board {wrapped.index}, not {keypair.index}"
        )
    shared = engine.gt_scale(keypair.secret, engine.pair(wrapped.c, engine.generator()))
    return SessionSecret(shared)


def ieid_encrypt_all(
    engine: PairingEngine,
    publics: Dict[int, SourceElement],
    payload: bytes,
    context: bytes,
    aad: bytes,
    rng: random.Random,
) -> Tuple[IeidPackage, ...]:
    """Wrap and seal once per board: exactly |boards| wraps and seals."""
    if not publics:
        raise ValueError("no boards to encrypt for")
    packages = []
    for i in sorted(publics):
        secret, wrapped = wrap_key(engine, publics[i], i, rng)
        key = derive_key(engine, secret, context + i.to_bytes(4, "big"))
        sealed = seal(key, payload, aad, rng, counters=engine.counters)
        packages.append(IeidPackage(index=i, wrapped=wrapped, sealed=sealed))
    return tuple(packages)


def ieid_decrypt(
    engine: PairingEngine,
    keypair: IeidKeyPair,
    package: IeidPackage,
    context: bytes,
    aad: bytes,
) -> bytes:
    """Open one board's own package; raises on someone else's."""
    secret = unwrap_key(engine, keypair, package.wrapped)
    key = derive_key(engine, secret, context + package.index.to_bytes(4, "big"))
    return open_sealed(key, package.sealed, aad)


# -- wrapped-key wire form -------------------------------------------------


def serialize_wrapped_key(engine: PairingEngine, wrapped: WrappedKey, n: int) -> bytes:
    backend_id = engine.backend.wire_id | IEID_WIRE_FLAG
    return (
        pack_header(MAGIC_WRAPPED_KEY, backend_id, n)
        + wrapped.index.to_bytes(4, "big")
        + pack_lp(engine.serialize_source(wrapped.c))
    )


def deserialize_wrapped_key(engine: PairingEngine, raw: bytes) -> Tuple[WrappedKey, int]:
    """Returns (wrapped key, capacity n)."""
    _, backend_id, n = unpack_header(raw, MAGIC_WRAPPED_KEY)
    if not backend_id & IEID_WIRE_FLAG:
        raise IntegrityError("wrapped key lacks the per-board scheme marker")
    if backend_id & ~IEID_WIRE_FLAG != engine.backend.wire_id:
        raise IntegrityError("wrapped key backend does not match engine")
    r = Reader(raw, offset=HEADER_SIZE)
    try:
        index = r.u32()
        c = engine.deserialize_source(r.lp())
        r.expect_end()
    except IntegrityError:
        raise
    except ValueError as exc:
        raise IntegrityError(f"malformed wrapped key: {exc}") from exc
    return WrappedKey(index=index, c=c), n
