"""Hybrid payload sealing: encapsulate a session element, seal with AEAD.

The key-aggregate layer encrypts elements of the target group, not byte
strings, so payloads take the standard KEM/DEM route: draw a uniform
target-group element as the session secret, encapsulate it for the cluster
with one constant-size key ciphertext, derive a 256-bit key from its
canonical serialization, and seal the payload with AES-256-GCM.

Session secrets are single-use by construction (fresh one per package), so
the random 96-bit nonce never repeats under one key.  Keys are plain bytes:
Python offers no reliable zeroization, so secrecy rests on process
isolation, and at-rest key material is sealed separately by the registry.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from agencid.errors import AuthFailureError, IntegrityError
from agencid.kac import AggregateKey, BoardPrivateKey, KeyCiphertext, PublicKey, SystemParams
from agencid import kac
from agencid.pairing.base import OpCounters, PairingEngine, TargetElement

__all__ = [
    "KDF_LABEL",
    "KEY_SIZE",
    "NONCE_SIZE",
    "TAG_SIZE",
    "SealedPayload",
    "SessionSecret",
    "SymmetricKey",
    "decapsulate",
    "derive_key",
    "encapsulate",
    "open_sealed",
    "pack_sealed",
    "seal",
    "unpack_sealed",
]

KDF_LABEL = b"AgEncID/v1/key"
KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16


@dataclass(frozen=True)
class SessionSecret:
    """Target-group element acting as the KEM payload; never persisted."""

    gt: TargetElement


@dataclass(frozen=True)
class SymmetricKey:
    """256-bit payload key derived from a session secret."""

    key: bytes

    def __post_init__(self) -> None:
        if len(self.key) != KEY_SIZE:
            raise ValueError(f"symmetric key must be {KEY_SIZE} bytes")


@dataclass(frozen=True)
class SealedPayload:
    """AEAD output; ``body`` is ciphertext plus the 16-byte tag."""

    nonce: bytes
    body: bytes
    aad_digest: bytes

    def __post_init__(self) -> None:
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
        if len(self.body) < TAG_SIZE:
            raise ValueError("sealed body shorter than the tag")
        if len(self.aad_digest) != 32:
            raise ValueError("aad digest must be 32 bytes")

    @property
    def ciphertext_len(self) -> int:
        return len(self.body) - TAG_SIZE


# -- KEM over the key-aggregate layer --------------------------------------


def encapsulate(
    engine: PairingEngine,
    pk: PublicKey,
    cluster: Iterable[int],
    agg: AggregateKey,
    rng: random.Random,
) -> Tuple[SessionSecret, KeyCiphertext]:
    """Fresh session secret plus its key ciphertext for the cluster."""
    secret = SessionSecret(engine.random_gt(rng))
    ct = kac.encrypt(engine, pk, cluster, agg, secret.gt, rng)
    engine.counters.wraps += 1
    return secret, ct


def decapsulate(
    engine: PairingEngine,
    params: SystemParams,
    index: int,
    key: BoardPrivateKey,
    ct: KeyCiphertext,
) -> Optional[SessionSecret]:
    """Recover the session secret on board ``index``; None outside S."""
    m = kac.decrypt(engine, params, ct.cluster, index, key, ct)
    return None if m is None else SessionSecret(m)


def derive_key(engine: PairingEngine, secret: SessionSecret, context: bytes) -> SymmetricKey:
    """HKDF-SHA256 over the canonical secret bytes, context-separated.

    info = KDF_LABEL + context, so equal secrets with different contexts
    (for example per-family packages sharing one cluster secret) yield
    independent keys.
    """
    hk = HKDF(
        algorithm=hashes.SHA256(),
        length=KEY_SIZE,
        salt=None,
        info=KDF_LABEL + context,
    )
    return SymmetricKey(hk.derive(engine.serialize_gt(secret.gt)))


# -- DEM -------------------------------------------------------------------


def seal(
    key: SymmetricKey,
    payload: bytes,
    aad: bytes,
    rng: random.Random,
    counters: Optional[OpCounters] = None,
) -> SealedPayload:
    """AES-256-GCM seal; ``aad`` is authenticated but not stored here."""
    nonce = rng.getrandbits(8 * NONCE_SIZE).to_bytes(NONCE_SIZE, "big")
    body = AESGCM(key.key).encrypt(nonce, payload, aad)
    if counters is not None:
        counters.seals += 1
    return SealedPayload(nonce=nonce, body=body, aad_digest=hashlib.sha256(aad).digest())


def open_sealed(key: SymmetricKey, sealed: SealedPayload, aad: bytes) -> bytes:
    """Recover the payload; any tamper of body, nonce, or aad fails."""
    if hashlib.sha256(aad).digest() != sealed.aad_digest:
        raise AuthFailureError("associated data does not match the sealed digest")
    try:
        return AESGCM(key.key).decrypt(sealed.nonce, sealed.body, aad)
    except InvalidTag as exc:
        raise AuthFailureError("payload authentication failed") from exc


# -- wire ------------------------------------------------------------------


def pack_sealed(sealed: SealedPayload) -> bytes:
    """nonce | 4-byte big-endian ciphertext length | ciphertext | tag."""
    ct = sealed.body[: sealed.ciphertext_len]
    tag = sealed.body[sealed.ciphertext_len :]
    return sealed.nonce + len(ct).to_bytes(4, "big") + ct + tag


def unpack_sealed(raw: bytes, aad: bytes) -> SealedPayload:
    """Parse the wire form; the caller supplies the aad it will open with."""
    if len(raw) < NONCE_SIZE + 4 + TAG_SIZE:
        raise IntegrityError("sealed payload too short")
    nonce = raw[:NONCE_SIZE]
    ct_len = int.from_bytes(raw[NONCE_SIZE : NONCE_SIZE + 4], "big")
    rest = raw[NONCE_SIZE + 4 :]
    if len(rest) != ct_len + TAG_SIZE:
        raise IntegrityError("sealed payload length mismatch")
    return SealedPayload(
        nonce=nonce, body=rest, aad_digest=hashlib.sha256(aad).digest()
    )
