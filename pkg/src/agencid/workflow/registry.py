"""Persistent registry: append-only journal, snapshot, sealed key storage.

State is a plain JSON document rebuilt by folding journal entries through a
pure reducer, so replaying the journal always reproduces the snapshot
digest; the snapshot file is just a cache plus the digest of record.  Every
entry carries a checksum over its canonical JSON, and sequence numbers must
be contiguous, so truncation or bit rot is detected at the damaged entry.

Board private keys never enter the journal in the clear: they are sealed
with AES-GCM under a key derived from a passphrase (env AGENCID_PASSPHRASE,
with an overridable development default) via scrypt, modeling the boards'
protected key storage at desk scale.

Writers serialize through an advisory file lock and re-read the journal
under the lock before appending, so independent CLI processes can share a
registry directory.
"""

from __future__ import annotations

import copy
import fcntl
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from agencid.errors import (
    AuthFailureError,
    DuplicateBoardError,
    DuplicateClusterError,
    DuplicateVendorError,
    NotFoundError,
    RegistryError,
)

__all__ = ["Registry", "apply_entry", "canonical_json", "state_digest"]

JOURNAL_NAME = "journal.ndjson"
SNAPSHOT_NAME = "snapshot.json"
LOCK_NAME = "registry.lock"

DEV_PASSPHRASE = "agencid-dev-passphrase"
PASSPHRASE_ENV = "AGENCID_PASSPHRASE"

# Desk-scale scrypt cost: fast enough for test suites that create many
# registries, still a real KDF.  Recorded in state so it can be raised later.
_SCRYPT_N = 2**12
_SCRYPT_R = 8
_SCRYPT_P = 1

_NONCE_SIZE = 12


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def state_digest(state: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(state).encode()).hexdigest()


def _entry_checksum(seq: int, op: str, data: Dict[str, Any]) -> str:
    return hashlib.sha256(
        canonical_json({"seq": seq, "op": op, "data": data}).encode()
    ).hexdigest()


def empty_state() -> Dict[str, Any]:
    return {"meta": {}, "vendors": {}, "boards": {}, "clusters": {}}


# -- reducer ---------------------------------------------------------------


def apply_entry(state: Dict[str, Any], op: str, data: Dict[str, Any]) -> None:
    """Fold one journal entry into state; shared by live path and replay."""
    if op == "registry_init":
        if state["meta"]:
            raise RegistryError("registry already initialized")
        state["meta"] = {
            "backend": data["backend"],
            "oracle_modulus": data.get("oracle_modulus"),
            "kdf": data["kdf"],
        }
    elif op == "vendor_init":
        vid = data["vendor"]
        if vid in state["vendors"]:
            raise DuplicateVendorError(f"vendor {vid!r} already initialized")
        state["vendors"][vid] = {
            "capacity": data["capacity"],
            "public_key": data["public_key"],
            "board_keys": data["board_keys"],
        }
    elif op == "board_register":
        bid = data["board_id"]
        vid = data["vendor"]
        if bid in state["boards"]:
            raise DuplicateBoardError(f"board {bid!r} already registered")
        if vid not in state["vendors"]:
            raise NotFoundError(f"vendor {vid!r} not initialized")
        index = data["index"]
        capacity = state["vendors"][vid]["capacity"]
        if not 1 <= index <= capacity:
            raise RegistryError(f"index {index} outside vendor capacity {capacity}")
        for other in state["boards"].values():
            if (
                other["vendor"] == vid
                and other["status"] == "active"
                and other["index"] == index
            ):
                raise RegistryError(f"index {index} already active for vendor {vid!r}")
        state["boards"][bid] = {
            "vendor": vid,
            "index": index,
            "family": data["family"],
            "status": "active",
            "private_key_ref": f"vendors/{vid}/board_keys/{index}",
        }
    elif op == "board_deregister":
        bid = data["board_id"]
        record = state["boards"].get(bid)
        if record is None:
            raise NotFoundError(f"board {bid!r} not registered")
        if record["status"] != "active":
            raise RegistryError(f"board {bid!r} already deregistered")
        record["status"] = "deregistered"
    elif op == "cluster_form":
        cid = data["cluster_id"]
        if cid in state["clusters"]:
            raise DuplicateClusterError(f"cluster {cid!r} already formed")
        for vid in data["vendors"]:
            if vid not in state["vendors"]:
                raise NotFoundError(f"vendor {vid!r} not initialized")
        state["clusters"][cid] = {
            "scenario": data["scenario"],
            "families": data["families"],
            "vendors": data["vendors"],
        }
    else:
        raise RegistryError(f"unknown journal op {op!r}")


# -- registry --------------------------------------------------------------


class Registry:
    """One registry directory: journal, snapshot, lock file."""

    def __init__(self, root: os.PathLike, passphrase: Optional[str] = None) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._passphrase = (
            passphrase
            if passphrase is not None
            else os.environ.get(PASSPHRASE_ENV, DEV_PASSPHRASE)
        )
        self._kek: Optional[bytes] = None
        self.state, self.seq = self._load()

    @property
    def journal_path(self) -> Path:
        return self.root / JOURNAL_NAME

    @property
    def snapshot_path(self) -> Path:
        return self.root / SNAPSHOT_NAME

    # -- persistence -------------------------------------------------------

    def _read_entries(self) -> Iterator[Dict[str, Any]]:
        if not self.journal_path.exists():
            return
        expected_seq = 1
        with self.journal_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    seq, op, data, checksum = (
                        entry["seq"],
                        entry["op"],
                        entry["data"],
                        entry["checksum"],
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise RegistryError(
                        f"journal corrupt at line {lineno}: {exc}"
                    ) from exc
                if checksum != _entry_checksum(seq, op, data):
                    raise RegistryError(f"journal checksum mismatch at line {lineno}")
                if seq != expected_seq:
                    raise RegistryError(
                        f"journal sequence gap at line {lineno}: "
                        f"expected {expected_seq}, found {seq}"
                    )
                expected_seq += 1
                yield entry

    def _replay(self) -> Tuple[Dict[str, Any], int]:
        state = empty_state()
        seq = 0
        for entry in self._read_entries():
            apply_entry(state, entry["op"], entry["data"])
            seq = entry["seq"]
        return state, seq

    def _load(self) -> Tuple[Dict[str, Any], int]:
        state, seq = self._replay()
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            if snap.get("seq") != seq or snap.get("digest") != state_digest(state):
                raise RegistryError(
                    "snapshot does not match journal replay; registry corrupt"
                )
        return state, seq

    def _write_snapshot(self) -> None:
        snap = {"seq": self.seq, "digest": state_digest(self.state), "state": self.state}
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(canonical_json(snap), encoding="utf-8")
        os.replace(tmp, self.snapshot_path)

    def append(self, op: str, data: Dict[str, Any]) -> Dict[str, Any]:
        """Validate against fresh on-disk state, persist, commit, snapshot."""
        lock_path = self.root / LOCK_NAME
        with lock_path.open("a+") as lock_fh:
            fcntl.flock(lock_fh.fileno(), fcntl.LOCK_EX)
            try:
                # Another process may have appended since we loaded.
                state, seq = self._replay()
                trial = copy.deepcopy(state)
                apply_entry(trial, op, data)
                seq += 1
                entry = {
                    "seq": seq,
                    "op": op,
                    "data": data,
                    "checksum": _entry_checksum(seq, op, data),
                }
                with self.journal_path.open("a", encoding="utf-8") as fh:
                    fh.write(canonical_json(entry) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                self.state, self.seq = trial, seq
                self._write_snapshot()
            finally:
                fcntl.flock(lock_fh.fileno(), fcntl.LOCK_UN)
        return self.state

    def digest(self) -> str:
        return state_digest(self.state)

    def verify_replay(self) -> Dict[str, Any]:
        """Replay the journal from disk and compare against the snapshot."""
        state, seq = self._replay()
        replayed = state_digest(state)
        report = {"entries": seq, "replayed_digest": replayed}
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            report["snapshot_digest"] = snap.get("digest")
            report["ok"] = snap.get("digest") == replayed and snap.get("seq") == seq
        else:
            report["snapshot_digest"] = None
            report["ok"] = seq == 0
        return report

    # -- sealed secrets ----------------------------------------------------

    def ensure_init(self, backend: str, oracle_modulus: Optional[int]) -> None:
        if self.state["meta"]:
            return
        self.append(
            "registry_init",
            {
                "backend": backend,
                "oracle_modulus": oracle_modulus,
                "kdf": {
                    "salt": os.urandom(16).hex(),
                    "n": _SCRYPT_N,
                    "r": _SCRYPT_R,
                    "p": _SCRYPT_P,
                },
            },
        )

    def _kdf_key(self) -> bytes:
        if self._kek is None:
            kdf = self.state["meta"].get("kdf")
            if not kdf:
                raise RegistryError("registry not initialized; no KDF parameters")
            self._kek = Scrypt(
                salt=bytes.fromhex(kdf["salt"]),
                length=32,
                n=kdf["n"],
                r=kdf["r"],
                p=kdf["p"],
            ).derive(self._passphrase.encode())
        return self._kek

    def seal_secret(self, context: bytes, plaintext: bytes) -> str:
        """Hex-encoded nonce + AES-GCM ciphertext under the passphrase key."""
        nonce = os.urandom(_NONCE_SIZE)
        body = AESGCM(self._kdf_key()).encrypt(nonce, plaintext, context)
        return (nonce + body).hex()

    def unseal_secret(self, context: bytes, blob_hex: str) -> bytes:
        raw = bytes.fromhex(blob_hex)
        nonce, body = raw[:_NONCE_SIZE], raw[_NONCE_SIZE:]
        try:
            return AESGCM(self._kdf_key()).decrypt(nonce, body, context)
        except InvalidTag as exc:
            raise AuthFailureError(
                "sealed key cannot be opened: wrong passphrase or corrupted record"
            ) from exc
