"""Hybrid layer: KDF golden vector, AEAD sealing, KEM over the scheme."""

import hashlib
import struct

import pytest

from agencid import kac
from agencid.errors import AuthFailureError, IntegrityError
from agencid.hybrid import (
    KDF_LABEL,
    KEY_SIZE,
    NONCE_SIZE,
    TAG_SIZE,
    SealedPayload,
    SessionSecret,
    SymmetricKey,
    decapsulate,
    derive_key,
    encapsulate,
    open_sealed,
    pack_sealed,
    seal,
    unpack_sealed,
)
from agencid.pairing.base import TargetElement, make_rng
from agencid.testing import fixture_system

# HKDF-SHA256(salt=zeros, ikm=8-byte BE 42, info=label + b"vector-context"),
# computed with an independent RFC 5869 implementation over hmac/hashlib.
GOLDEN_KDF_HEX = "ae63ab9dae84887fddf8b1e6d80fb6509ec8948799f57efae4dc5255a3fd6125"


def test_kdf_label_is_pinned():
    assert KDF_LABEL == b"AgEncID/v1/key"


def test_derive_key_golden_vector(sym_engine):
    secret = SessionSecret(TargetElement(sym_engine.backend, 42))
    key = derive_key(sym_engine, secret, b"vector-context")
    assert key.key.hex() == GOLDEN_KDF_HEX


def test_derive_key_context_separation(sym_engine):
    secret = SessionSecret(TargetElement(sym_engine.backend, 42))
    k1 = derive_key(sym_engine, secret, b"a")
    k2 = derive_key(sym_engine, secret, b"b")
    k3 = derive_key(sym_engine, SessionSecret(TargetElement(sym_engine.backend, 43)), b"a")
    assert len({k1.key, k2.key, k3.key}) == 3


# -- sealing ---------------------------------------------------------------


def fixed_key():
    return SymmetricKey(bytes(range(32)))


def test_seal_open_roundtrip():
    rng = make_rng(1)
    for payload in (b"", b"x", b"payload bytes" * 100):
        sealed = seal(fixed_key(), payload, b"aad", rng)
        assert open_sealed(fixed_key(), sealed, b"aad") == payload


def test_seal_structure():
    sealed = seal(fixed_key(), b"hello", b"aad", make_rng(2))
    assert len(sealed.nonce) == NONCE_SIZE
    assert sealed.ciphertext_len == 5
    assert len(sealed.body) == 5 + TAG_SIZE
    assert sealed.aad_digest == hashlib.sha256(b"aad").digest()


def test_seal_deterministic_with_seeded_rng():
    one = seal(fixed_key(), b"hello", b"aad", make_rng(3))
    two = seal(fixed_key(), b"hello", b"aad", make_rng(3))
    assert one == two
    # fresh nonce when the rng advances
    rng = make_rng(3)
    a, b = seal(fixed_key(), b"x", b"", rng), seal(fixed_key(), b"x", b"", rng)
    assert a.nonce != b.nonce


def test_open_rejects_tampering():
    sealed = seal(fixed_key(), b"hello world", b"aad", make_rng(4))
    for i in range(len(sealed.body)):
        body = bytearray(sealed.body)
        body[i] ^= 1
        bad = SealedPayload(sealed.nonce, bytes(body), sealed.aad_digest)
        with pytest.raises(AuthFailureError):
            open_sealed(fixed_key(), bad, b"aad")
    nonce = bytearray(sealed.nonce)
    nonce[0] ^= 1
    with pytest.raises(AuthFailureError):
        open_sealed(fixed_key(), SealedPayload(bytes(nonce), sealed.body, sealed.aad_digest), b"aad")


def test_open_rejects_wrong_aad():
    sealed = seal(fixed_key(), b"hello", b"right", make_rng(5))
    with pytest.raises(AuthFailureError):
        open_sealed(fixed_key(), sealed, b"wrong")
    # even with a digest forged to match the wrong aad, the AEAD tag fails
    forged = SealedPayload(sealed.nonce, sealed.body, hashlib.sha256(b"wrong").digest())
    with pytest.raises(AuthFailureError):
        open_sealed(fixed_key(), forged, b"wrong")


def test_open_rejects_wrong_key():
    sealed = seal(fixed_key(), b"hello", b"aad", make_rng(6))
    other = SymmetricKey(bytes(32))
    with pytest.raises(AuthFailureError):
        open_sealed(other, sealed, b"aad")


def test_pack_unpack_roundtrip():
    sealed = seal(fixed_key(), b"some payload", b"aad", make_rng(7))
    raw = pack_sealed(sealed)
    # nonce | u32 ciphertext length | ciphertext | tag
    assert raw[:NONCE_SIZE] == sealed.nonce
    (ct_len,) = struct.unpack(">I", raw[NONCE_SIZE : NONCE_SIZE + 4])
    assert ct_len == sealed.ciphertext_len
    assert raw[NONCE_SIZE + 4 :] == sealed.body
    back = unpack_sealed(raw, b"aad")
    assert back == sealed
    assert open_sealed(fixed_key(), back, b"aad") == b"some payload"


def test_unpack_rejects_malformed():
    sealed = seal(fixed_key(), b"p", b"aad", make_rng(8))
    raw = pack_sealed(sealed)
    with pytest.raises(IntegrityError):
        unpack_sealed(raw[:-1], b"aad")
    with pytest.raises(IntegrityError):
        unpack_sealed(raw + b"\x00", b"aad")
    with pytest.raises(IntegrityError):
        unpack_sealed(raw[:NONCE_SIZE], b"aad")


def test_symmetric_key_validation():
    with pytest.raises(ValueError):
        SymmetricKey(b"short")
    with pytest.raises(ValueError):
        SealedPayload(b"\x00" * 11, b"\x00" * 16, b"\x00" * 32)
    with pytest.raises(ValueError):
        SealedPayload(b"\x00" * 12, b"\x00" * 15, b"\x00" * 32)
    with pytest.raises(ValueError):
        SealedPayload(b"\x00" * 12, b"\x00" * 16, b"\x00" * 31)


def test_seal_counter_hookup(sym_engine):
    rng = make_rng(9)
    before = sym_engine.counters.snapshot()
    seal(fixed_key(), b"x", b"", rng)  # no counters passed: nothing bumped
    assert sym_engine.counters.delta(before).seals == 0
    seal(fixed_key(), b"x", b"", rng, counters=sym_engine.counters)
    assert sym_engine.counters.delta(before).seals == 1


# -- KEM over the key-aggregate layer --------------------------------------


def test_encapsulate_decapsulate(any_engine):
    e = any_engine
    rng = make_rng(10)
    params = kac.setup(e, 4, rng)
    pk, _, boards = kac.keygen(e, params, rng)
    cluster = (1, 2, 4)
    agg = kac.extract(e, params, cluster)
    before = e.counters.snapshot()
    secret, ct = encapsulate(e, pk, cluster, agg, rng)
    d = e.counters.delta(before)
    assert d.wraps == 1 and d.pairings == 0
    for i in cluster:
        got = decapsulate(e, params, i, boards[i - 1], ct)
        assert got is not None and got.gt.data == secret.gt.data
    assert decapsulate(e, params, 3, boards[2], ct) is None


def test_kem_to_payload_flow(sym_engine):
    e = sym_engine
    rng = make_rng(11)
    params, pk, _, boards = fixture_system(e, 3, alpha=3, gamma=5)
    agg = kac.extract(e, params, (2, 3))
    secret, ct = encapsulate(e, pk, (2, 3), agg, rng)
    key = derive_key(e, secret, b"pkg-1")
    sealed = seal(key, b"the payload", b"pkg-1", rng)
    recovered = decapsulate(e, params, 3, boards[2], ct)
    assert open_sealed(derive_key(e, recovered, b"pkg-1"), sealed, b"pkg-1") == b"the payload"
    with pytest.raises(AuthFailureError):
        open_sealed(derive_key(e, recovered, b"pkg-2"), sealed, b"pkg-1")
