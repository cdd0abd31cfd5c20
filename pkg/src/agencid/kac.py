"""Key-aggregate cryptosystem: one ciphertext per cluster, one key per board.

Public parameters hold powers g_i = alpha^i * g for i in {1..n, n+2..2n};
index n+1 is deliberately absent (the hole) and is never computed anywhere.
A cluster S gets a single constant-size aggregate key K_S = sum of
g_{n+1-j} over j in S; encryption under K_S produces one constant-size
triple (c1, c2, c3); board i in S decrypts with its private key d_i using
exactly two pairings.  Board i not in S gets None, a modeled outcome, not
an error.

All operations are pure functions over (engine, inputs, rng); all key
material is immutable.
"""

from __future__ import annotations

import contextlib
import random
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

from agencid.errors import (
    ClusterMismatchError,
    IntegrityError,
    InvalidCapacityError,
    InvalidClusterError,
    KeyMismatchError,
)
from agencid.pairing.base import (
    PairingEngine,
    Scalar,
    SourceElement,
    TargetElement,
)
from agencid.wire import (
    HEADER_SIZE,
    Reader,
    pack_header,
    pack_index_set,
    pack_lp,
    unpack_header,
)

__all__ = [
    "AggregateKey",
    "BoardPrivateKey",
    "KeyCiphertext",
    "MasterSecretKey",
    "PublicKey",
    "SystemParams",
    "decrypt",
    "deserialize_aggregate_key",
    "deserialize_board_key",
    "deserialize_key_ciphertext",
    "deserialize_public_key",
    "encrypt",
    "extract",
    "keygen",
    "serialize_aggregate_key",
    "serialize_board_key",
    "serialize_key_ciphertext",
    "serialize_public_key",
    "setup",
    "validate_cluster",
]

MAGIC_PUBLIC_KEY = b"AGPK"
MAGIC_BOARD_KEY = b"AGSK"
MAGIC_AGGREGATE_KEY = b"AGAK"
MAGIC_KEY_CIPHERTEXT = b"AGKC"


# -- domain types ----------------------------------------------------------


@dataclass(frozen=True)
class SystemParams:
    """Public cryptosystem parameters for a capacity of ``n`` boards."""

    n: int
    generator: SourceElement
    elements: Mapping[int, SourceElement]
    precomputed_base: TargetElement

    def element(self, i: int) -> SourceElement:
        if i == self.n + 1:
            raise InvalidClusterError(f"index {i} is the reserved hole")
        try:
            return self.elements[i]
        except KeyError:
            raise InvalidClusterError(f"index {i} outside stored range") from None

    @property
    def stored_indices(self) -> Tuple[int, ...]:
        return stored_indices(self.n)


@dataclass(frozen=True)
class MasterSecretKey:
    gamma: Scalar


@dataclass(frozen=True)
class PublicKey:
    params: SystemParams
    v: SourceElement


@dataclass(frozen=True)
class BoardPrivateKey:
    index: int
    d: SourceElement
    n: int


@dataclass(frozen=True)
class AggregateKey:
    cluster: Tuple[int, ...]
    k: SourceElement
    n: int


@dataclass(frozen=True)
class KeyCiphertext:
    c1: SourceElement
    c2: SourceElement
    c3: TargetElement
    cluster: Tuple[int, ...]
    n: int


def stored_indices(n: int) -> Tuple[int, ...]:
    """All parameter indices: 1..n and n+2..2n, skipping the hole at n+1."""
    return tuple(range(1, n + 1)) + tuple(range(n + 2, 2 * n + 1))


def validate_cluster(cluster: Iterable[int], n: int) -> Tuple[int, ...]:
    """Normalize to a sorted tuple of distinct indices within [1, n]."""
    s = sorted(set(cluster))
    if not s:
        raise InvalidClusterError("cluster is empty")
    if s[0] < 1 or s[-1] > n:
        bad = [j for j in s if not 1 <= j <= n]
        raise InvalidClusterError(f"indices {bad} outside [1, {n}]")
    return tuple(s)


# -- the five algorithms ---------------------------------------------------


def setup(engine: PairingEngine, n: int, rng: random.Random) -> SystemParams:
    """Generate public parameters; the transient exponent alpha is discarded.

    The chain g_i = alpha * g_{i-1} runs 1..n, then jumps the hole with a
    single alpha^2 step to n+2, so alpha^(n+1) * g is never formed.
    """
    if n < 1:
        raise InvalidCapacityError("capacity must be at least 1")
    if engine.scalar_order <= 4 * n:
        raise InvalidCapacityError(
            f"group order {engine.scalar_order} too small for capacity {n}"
        )
    alpha = engine.random_nonzero_scalar(rng)
    g = engine.generator()
    elements: Dict[int, SourceElement] = {}
    acc = g
    for i in range(1, n + 1):
        acc = engine.scalar_mul(alpha, acc)
        elements[i] = acc
    if n >= 2:
        acc = engine.scalar_mul(alpha.mul(alpha), elements[n])
        elements[n + 2] = acc
        for i in range(n + 3, 2 * n + 1):
            acc = engine.scalar_mul(alpha, acc)
            elements[i] = acc
    base = engine.pair(elements[n], elements[1])
    return SystemParams(n=n, generator=g, elements=elements, precomputed_base=base)


def keygen(
    engine: PairingEngine, params: SystemParams, rng: random.Random
) -> Tuple[PublicKey, MasterSecretKey, Tuple[BoardPrivateKey, ...]]:
    """Draw the master secret gamma; derive v and all n board private keys."""
    gamma = engine.random_nonzero_scalar(rng)
    v = engine.scalar_mul(gamma, params.generator)
    boards = tuple(
        BoardPrivateKey(index=i, d=engine.scalar_mul(gamma, params.element(i)), n=params.n)
        for i in range(1, params.n + 1)
    )
    return PublicKey(params=params, v=v), MasterSecretKey(gamma=gamma), boards


def extract(engine: PairingEngine, params: SystemParams, cluster: Iterable[int]) -> AggregateKey:
    """Aggregate key K_S = sum of g_{n+1-j} for j in S; one element, any |S|."""
    s = validate_cluster(cluster, params.n)
    n = params.n
    k = params.element(n + 1 - s[0])
    for j in s[1:]:
        k = engine.add(k, params.element(n + 1 - j))
    return AggregateKey(cluster=s, k=k, n=n)


def encrypt(
    engine: PairingEngine,
    pk: PublicKey,
    cluster: Iterable[int],
    agg: AggregateKey,
    m: TargetElement,
    rng: random.Random,
) -> KeyCiphertext:
    """Randomized encryption of m for cluster S; performs no pairing.

    c1 = t*g, c2 = t*(v + K_S), c3 = m combined with t-scaled
    precomputed_base, with fresh nonzero t per call.
    """
    params = pk.params
    s = validate_cluster(cluster, params.n)
    if agg.cluster != s:
        raise ClusterMismatchError(
            f"aggregate key is for cluster {agg.cluster}, not {s}"
        )
    t = engine.random_nonzero_scalar(rng)
    c1 = engine.scalar_mul(t, params.generator)
    c2 = engine.scalar_mul(t, engine.add(pk.v, agg.k))
    c3 = engine.gt_combine(m, engine.gt_scale(t, params.precomputed_base))
    return KeyCiphertext(c1=c1, c2=c2, c3=c3, cluster=s, n=params.n)


def decrypt(
    engine: PairingEngine,
    params: SystemParams,
    cluster: Iterable[int],
    index: int,
    key: BoardPrivateKey,
    ct: KeyCiphertext,
) -> Optional[TargetElement]:
    """Recover m on board ``index``; None when the board is outside S.

    m = c3 combined with pair(d_i + b, c1), uncombined with pair(g_i, c2),
    where b = sum of g_{n+1-j+i} over j in S, j != i.  Exactly two pairings
    and |S| - 1 source-group additions.
    """
    if key.index != index:
        raise KeyMismatchError(f"key is for board {key.index}, not {index}")
    s = validate_cluster(cluster, params.n)
    if index not in s:
        return None
    n = params.n
    acc: Optional[SourceElement] = None
    for j in s:
        if j == index:
            continue
        # j != index keeps n+1-j+index clear of the hole at n+1.
        term = params.element(n + 1 - j + index)
        acc = term if acc is None else engine.add(acc, term)
    lifted = key.d if acc is None else engine.add(key.d, acc)
    e1 = engine.pair(lifted, ct.c1)
    e2 = engine.pair(params.element(index), ct.c2)
    return engine.gt_uncombine(engine.gt_combine(ct.c3, e1), e2)


# -- canonical serialization -----------------------------------------------


@contextlib.contextmanager
def _wire_errors(what: str) -> Iterator[None]:
    """Corrupt element encodings surface as IntegrityError, like any other
    parse failure; IntegrityError from the reader passes through as is."""
    try:
        yield
    except IntegrityError:
        raise
    except ValueError as exc:
        raise IntegrityError(f"malformed {what}: {exc}") from exc


def serialize_public_key(engine: PairingEngine, pk: PublicKey) -> bytes:
    params = pk.params
    parts = [pack_header(MAGIC_PUBLIC_KEY, engine.backend.wire_id, params.n)]
    parts.append(pack_lp(engine.serialize_source(params.generator)))
    for i in params.stored_indices:
        parts.append(pack_lp(engine.serialize_source(params.elements[i])))
    parts.append(pack_lp(engine.serialize_gt(params.precomputed_base)))
    parts.append(pack_lp(engine.serialize_source(pk.v)))
    return b"".join(parts)


def deserialize_public_key(engine: PairingEngine, raw: bytes) -> PublicKey:
    n = _read_header(engine, raw, MAGIC_PUBLIC_KEY)
    r = Reader(raw, offset=HEADER_SIZE)
    with _wire_errors("public key"):
        g = engine.deserialize_source(r.lp())
        elements = {i: engine.deserialize_source(r.lp()) for i in stored_indices(n)}
        base = engine.deserialize_gt(r.lp())
        v = engine.deserialize_source(r.lp())
        r.expect_end()
    # The pairing-free encrypt path trusts precomputed_base, so cross-check
    # it against its defining pairing whenever parameters are loaded.
    expected = engine.pair_unmetered(elements[n], elements[1])
    if expected.data != base.data:
        raise IntegrityError("precomputed base does not match pair(g_n, g_1)")
    params = SystemParams(n=n, generator=g, elements=elements, precomputed_base=base)
    return PublicKey(params=params, v=v)


def serialize_board_key(engine: PairingEngine, key: BoardPrivateKey) -> bytes:
    return (
        pack_header(MAGIC_BOARD_KEY, engine.backend.wire_id, key.n)
        + key.index.to_bytes(4, "big")
        + pack_lp(engine.serialize_source(key.d))
    )


def deserialize_board_key(engine: PairingEngine, raw: bytes) -> BoardPrivateKey:
    n = _read_header(engine, raw, MAGIC_BOARD_KEY)
    r = Reader(raw, offset=HEADER_SIZE)
    with _wire_errors("board key"):
        index = r.u32()
        if not 1 <= index <= n:
            raise IntegrityError(f"board index {index} outside [1, {n}]")
        d = engine.deserialize_source(r.lp())
        r.expect_end()
    return BoardPrivateKey(index=index, d=d, n=n)


def serialize_aggregate_key(engine: PairingEngine, agg: AggregateKey) -> bytes:
    return (
        pack_header(MAGIC_AGGREGATE_KEY, engine.backend.wire_id, agg.n)
        + pack_index_set(agg.cluster)
        + pack_lp(engine.serialize_source(agg.k))
    )


def deserialize_aggregate_key(engine: PairingEngine, raw: bytes) -> AggregateKey:
    n = _read_header(engine, raw, MAGIC_AGGREGATE_KEY)
    r = Reader(raw, offset=HEADER_SIZE)
    with _wire_errors("aggregate key"):
        cluster = validate_cluster(r.index_set(), n)
        k = engine.deserialize_source(r.lp())
        r.expect_end()
    return AggregateKey(cluster=cluster, k=k, n=n)


def serialize_key_ciphertext(engine: PairingEngine, ct: KeyCiphertext) -> bytes:
    return (
        pack_header(MAGIC_KEY_CIPHERTEXT, engine.backend.wire_id, ct.n)
        + pack_index_set(ct.cluster)
        + pack_lp(engine.serialize_source(ct.c1))
        + pack_lp(engine.serialize_source(ct.c2))
        + pack_lp(engine.serialize_gt(ct.c3))
    )


def deserialize_key_ciphertext(engine: PairingEngine, raw: bytes) -> KeyCiphertext:
    n = _read_header(engine, raw, MAGIC_KEY_CIPHERTEXT)
    r = Reader(raw, offset=HEADER_SIZE)
    with _wire_errors("key ciphertext"):
        cluster = validate_cluster(r.index_set(), n)
        c1 = engine.deserialize_source(r.lp())
        c2 = engine.deserialize_source(r.lp())
        c3 = engine.deserialize_gt(r.lp())
        r.expect_end()
    return KeyCiphertext(c1=c1, c2=c2, c3=c3, cluster=cluster, n=n)


def _read_header(engine: PairingEngine, raw: bytes, magic: bytes) -> int:
    _, backend_id, n = unpack_header(raw, magic)
    if backend_id != engine.backend.wire_id:
        raise IntegrityError(
            f"artifact backend id {backend_id:#x} does not match engine "
            f"{engine.backend.wire_id:#x}"
        )
    if n < 1:
        raise IntegrityError("capacity in header must be positive")
    return n
