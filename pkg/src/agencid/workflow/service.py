"""Role orchestration over the registry: vendor, broker, provider, board.

A vendor provisions capacity (public key plus sealed per-board private
keys), boards enroll against indices with lowest-available-first reuse,
clusters bind member boards to an aggregate key, providers encrypt a
payload once per cluster (per vendor sub-cluster, per family group), and
boards open packages addressed to their index.  Board-outside-cluster is a
modeled rejection, never an exception.

Multi-vendor clusters are compositions: each vendor's sub-cluster gets its
own aggregate key and key ciphertext, since aggregate keys cannot span
parameter sets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union

from agencid import kac
from agencid.errors import (
    CapacityExhaustedError,
    DuplicateVendorError,
    InactiveBoardError,
    IntegrityError,
    NotFoundError,
    RegistryError,
    ScenarioError,
)
from agencid.hybrid import decapsulate, derive_key, encapsulate, open_sealed, seal
from agencid.pairing.base import Backend, PairingEngine
from agencid.workflow.containers import (
    EncryptedPackage,
    PackageHeader,
    deserialize_package,
    serialize_package,
)
from agencid.workflow.registry import Registry

__all__ = ["DecryptOutcome", "PackageFile", "Workflow"]


@dataclass(frozen=True)
class PackageFile:
    """One produced package: id, addressing metadata, container bytes."""

    package_id: str
    vendor: str
    family: str
    data: bytes


@dataclass(frozen=True)
class DecryptOutcome:
    """Either a recovered payload or a structured rejection."""

    payload: Optional[bytes]
    reason: str

    @property
    def rejected(self) -> bool:
        return self.payload is None


class Workflow:
    def __init__(
        self,
        registry: Registry,
        engine: PairingEngine,
        rng: Optional[random.Random] = None,
    ) -> None:
        self.registry = registry
        self.engine = engine
        self.rng = rng if rng is not None else engine.config.make_rng()
        meta = registry.state["meta"]
        if meta and meta["backend"] != engine.backend.value:
            raise RegistryError(
                f"registry was created with the {meta['backend']} backend, "
                f"engine is {engine.backend.value}"
            )
        if (
            meta
            and engine.backend is Backend.SYMBOLIC
            and meta.get("oracle_modulus") != engine.config.oracle_modulus
        ):
            raise RegistryError(
                "registry oracle modulus does not match the engine configuration"
            )

    # -- vendor role -------------------------------------------------------

    def vendor_init(self, vendor_id: str, capacity: int) -> Dict[str, Any]:
        """Provision a vendor keyspace: public key plus n sealed board keys."""
        if vendor_id in self.registry.state["vendors"]:
            raise DuplicateVendorError(f"vendor {vendor_id!r} already initialized")
        self._ensure_init()
        params = kac.setup(self.engine, capacity, self.rng)
        pk, _msk, boards = kac.keygen(self.engine, params, self.rng)
        board_keys = {
            str(key.index): self.registry.seal_secret(
                self._board_key_context(vendor_id, key.index),
                kac.serialize_board_key(self.engine, key),
            )
            for key in boards
        }
        self.registry.append(
            "vendor_init",
            {
                "vendor": vendor_id,
                "capacity": capacity,
                "public_key": kac.serialize_public_key(self.engine, pk).hex(),
                "board_keys": board_keys,
            },
        )
        return {"vendor": vendor_id, "capacity": capacity}

    # -- broker role -------------------------------------------------------

    def register_board(self, vendor_id: str, board_id: str, family: str) -> Dict[str, Any]:
        vendor = self.registry.state["vendors"].get(vendor_id)
        if vendor is None:
            raise NotFoundError(f"vendor {vendor_id!r} not initialized")
        index = self._lowest_free_index(vendor_id, vendor["capacity"])
        self.registry.append(
            "board_register",
            {"board_id": board_id, "vendor": vendor_id, "index": index, "family": family},
        )
        return dict(self.registry.state["boards"][board_id], board_id=board_id)

    def deregister_board(self, board_id: str) -> Dict[str, Any]:
        self.registry.append("board_deregister", {"board_id": board_id})
        return dict(self.registry.state["boards"][board_id], board_id=board_id)

    def form_cluster(
        self,
        cluster_id: str,
        members: Sequence[Union[str, int]],
        vendor: Optional[str] = None,
        scenario_hint: Optional[int] = None,
    ) -> Dict[str, Any]:
        """Resolve members, detect the scenario, extract aggregate keys.

        Members are board ids, or bare indices resolved within ``vendor``
        (or the registry's sole vendor).  Scenario: 1 = one vendor and one
        family, 2 = one vendor and several families, 3 = several vendors.
        """
        records = {}
        for token in members:
            board_id, record = self._resolve_member(token, vendor)
            records[board_id] = record
        if not records:
            raise ScenarioError("cluster needs at least one member board")
        by_vendor: Dict[str, List[Dict[str, Any]]] = {}
        for board_id, record in sorted(records.items(), key=lambda kv: (kv[1]["vendor"], kv[1]["index"])):
            by_vendor.setdefault(record["vendor"], []).append(
                {"index": record["index"], "family": record["family"], "board_id": board_id}
            )
        families = sorted({m["family"] for ms in by_vendor.values() for m in ms})
        if len(by_vendor) > 1:
            scenario = 3
        elif len(families) > 1:
            scenario = 2
        else:
            scenario = 1
        if scenario_hint is not None and scenario_hint != scenario:
            raise ScenarioError(
                f"membership implies scenario {scenario}, hint was {scenario_hint}"
            )
        vendors_data = {}
        for vid, ms in by_vendor.items():
            pk = self._load_public_key(vid)
            indices = [m["index"] for m in ms]
            agg = kac.extract(self.engine, pk.params, indices)
            vendors_data[vid] = {
                "members": ms,
                "aggregate_key": kac.serialize_aggregate_key(self.engine, agg).hex(),
            }
        self.registry.append(
            "cluster_form",
            {
                "cluster_id": cluster_id,
                "scenario": scenario,
                "families": families,
                "vendors": vendors_data,
            },
        )
        return {
            "cluster_id": cluster_id,
            "scenario": scenario,
            "families": families,
            "members": {vid: [m["index"] for m in ms] for vid, ms in by_vendor.items()},
        }

    # -- provider role -----------------------------------------------------

    def encrypt_package(
        self, cluster_id: str, payload: bytes, package_id: Optional[str] = None
    ) -> List[PackageFile]:
        """One key encapsulation per vendor sub-cluster, one seal per family.

        Every produced package shares the sub-cluster's key ciphertext; the
        per-package header feeds the KDF context and the AEAD associated
        data, so family packages carry independent symmetric keys.
        """
        cluster = self.registry.state["clusters"].get(cluster_id)
        if cluster is None:
            raise NotFoundError(f"cluster {cluster_id!r} not formed")
        base_id = package_id if package_id else "pkg"
        multi_vendor = len(cluster["vendors"]) > 1
        out: List[PackageFile] = []
        for vid in sorted(cluster["vendors"]):
            sub = cluster["vendors"][vid]
            pk = self._load_public_key(vid)
            indices = tuple(sorted(m["index"] for m in sub["members"]))
            agg = self._load_aggregate_key(pk, indices, sub["aggregate_key"])
            secret, key_ct = encapsulate(self.engine, pk, indices, agg, self.rng)
            key_blob = kac.serialize_key_ciphertext(self.engine, key_ct)
            groups: Dict[str, List[int]] = {}
            for m in sub["members"]:
                groups.setdefault(m["family"], []).append(m["index"])
            multi_family = len(groups) > 1
            for family in sorted(groups):
                pid = base_id
                if multi_vendor:
                    pid += f"-{vid}"
                if multi_family:
                    pid += f"-{family}"
                header = PackageHeader(
                    backend_id=self.engine.backend.wire_id,
                    vendor_id=vid,
                    cluster_id=cluster_id,
                    package_id=pid,
                    cluster=indices,
                )
                aad = header.to_bytes()
                key = derive_key(self.engine, secret, aad)
                sealed = seal(key, payload, aad, self.rng, counters=self.engine.counters)
                data = serialize_package(
                    EncryptedPackage(header=header, key_blob=key_blob, sealed=sealed)
                )
                out.append(PackageFile(package_id=pid, vendor=vid, family=family, data=data))
        return out

    # -- board role --------------------------------------------------------

    def decrypt_package(self, board_id: str, data: bytes) -> DecryptOutcome:
        record = self.registry.state["boards"].get(board_id)
        if record is None:
            raise NotFoundError(f"board {board_id!r} not registered")
        if record["status"] != "active":
            raise InactiveBoardError(f"board {board_id!r} is deregistered; key unavailable")
        pkg = deserialize_package(data)
        if pkg.header.is_ieid:
            raise IntegrityError(
                "package uses the per-board baseline scheme; not a cluster package"
            )
        if pkg.header.backend_id != self.engine.backend.wire_id:
            raise IntegrityError("package backend does not match the registry engine")
        # Structural cross-checks come before the membership decision so a
        # flipped header byte reads as corruption, not as a package that
        # merely addresses someone else.
        try:
            key_ct = kac.deserialize_key_ciphertext(self.engine, pkg.key_blob)
        except ValueError as exc:
            raise IntegrityError(f"malformed key ciphertext: {exc}") from exc
        if key_ct.cluster != pkg.header.cluster:
            raise IntegrityError("header cluster disagrees with the key ciphertext")
        if pkg.header.vendor_id not in self.registry.state["vendors"]:
            raise IntegrityError(
                f"package names unknown vendor {pkg.header.vendor_id!r}"
            )
        if pkg.header.vendor_id != record["vendor"]:
            return DecryptOutcome(payload=None, reason="foreign-vendor")
        if record["index"] not in pkg.header.cluster:
            return DecryptOutcome(payload=None, reason="not-in-cluster")
        pk = self._load_public_key(record["vendor"])
        if key_ct.n != pk.params.n:
            raise IntegrityError("key ciphertext capacity disagrees with vendor parameters")
        board_key = self._unseal_board_key(record["vendor"], record["index"])
        secret = decapsulate(self.engine, pk.params, record["index"], board_key, key_ct)
        if secret is None:
            return DecryptOutcome(payload=None, reason="not-in-cluster")
        aad = pkg.aad
        key = derive_key(self.engine, secret, aad)
        payload = open_sealed(key, pkg.sealed, aad)
        return DecryptOutcome(payload=payload, reason="ok")

    # -- introspection -----------------------------------------------------

    def registry_view(self) -> Dict[str, Any]:
        state = self.registry.state
        return {
            "digest": self.registry.digest(),
            "entries": self.registry.seq,
            "backend": state["meta"].get("backend"),
            "vendors": {
                vid: {
                    "capacity": v["capacity"],
                    "keys_provisioned": len(v["board_keys"]),
                }
                for vid, v in sorted(state["vendors"].items())
            },
            "boards": {
                bid: {
                    "vendor": b["vendor"],
                    "index": b["index"],
                    "family": b["family"],
                    "status": b["status"],
                }
                for bid, b in sorted(state["boards"].items())
            },
            "clusters": {
                cid: {
                    "scenario": c["scenario"],
                    "families": c["families"],
                    "members": {
                        vid: [m["index"] for m in sub["members"]]
                        for vid, sub in sorted(c["vendors"].items())
                    },
                }
                for cid, c in sorted(state["clusters"].items())
            },
        }

    def replay_check(self) -> Dict[str, Any]:
        return self.registry.verify_replay()

    # -- internals ---------------------------------------------------------

    def _ensure_init(self) -> None:
        modulus = (
            self.engine.config.oracle_modulus
            if self.engine.backend is Backend.SYMBOLIC
            else None
        )
        self.registry.ensure_init(self.engine.backend.value, modulus)

    @staticmethod
    def _board_key_context(vendor_id: str, index: int) -> bytes:
        return f"board-key:{vendor_id}:{index}".encode()

    def _lowest_free_index(self, vendor_id: str, capacity: int) -> int:
        taken = {
            r["index"]
            for r in self.registry.state["boards"].values()
            if r["vendor"] == vendor_id and r["status"] == "active"
        }
        for i in range(1, capacity + 1):
            if i not in taken:
                return i
        raise CapacityExhaustedError(
            f"vendor {vendor_id!r} has no free index within capacity {capacity}"
        )

    def _resolve_member(self, token: Union[str, int], vendor: Optional[str]):
        boards = self.registry.state["boards"]
        if isinstance(token, str) and not token.isdigit():
            record = boards.get(token)
            if record is None:
                raise NotFoundError(f"board {token!r} not registered")
            if record["status"] != "active":
                raise InactiveBoardError(f"board {token!r} is deregistered")
            return token, record
        index = int(token)
        vid = vendor
        if vid is None:
            vendors = sorted(self.registry.state["vendors"])
            if len(vendors) != 1:
                raise NotFoundError(
                    "bare index needs --vendor when the registry has "
                    f"{len(vendors)} vendors"
                )
            vid = vendors[0]
        for board_id, record in boards.items():
            if (
                record["vendor"] == vid
                and record["index"] == index
                and record["status"] == "active"
            ):
                return board_id, record
        raise NotFoundError(f"no active board at index {index} for vendor {vid!r}")

    def _load_public_key(self, vendor_id: str) -> kac.PublicKey:
        vendor = self.registry.state["vendors"].get(vendor_id)
        if vendor is None:
            raise NotFoundError(f"vendor {vendor_id!r} not initialized")
        try:
            return kac.deserialize_public_key(
                self.engine, bytes.fromhex(vendor["public_key"])
            )
        except ValueError as exc:
            raise IntegrityError(f"stored public key is corrupt: {exc}") from exc

    def _load_aggregate_key(self, pk: kac.PublicKey, indices, blob_hex: str) -> kac.AggregateKey:
        try:
            agg = kac.deserialize_aggregate_key(self.engine, bytes.fromhex(blob_hex))
        except ValueError as exc:
            raise IntegrityError(f"stored aggregate key is corrupt: {exc}") from exc
        if agg.cluster != tuple(indices):
            raise IntegrityError("aggregate key cluster disagrees with the registry")
        recomputed = kac.extract(self.engine, pk.params, indices)
        if self.engine.serialize_source(recomputed.k) != self.engine.serialize_source(agg.k):
            raise IntegrityError("aggregate key does not match the cluster membership")
        return agg

    def _unseal_board_key(self, vendor_id: str, index: int) -> kac.BoardPrivateKey:
        vendor = self.registry.state["vendors"][vendor_id]
        blob = vendor["board_keys"].get(str(index))
        if blob is None:
            raise RegistryError(f"no provisioned key for index {index}")
        raw = self.registry.unseal_secret(self._board_key_context(vendor_id, index), blob)
        try:
            return kac.deserialize_board_key(self.engine, raw)
        except ValueError as exc:
            raise IntegrityError(f"sealed board key is corrupt: {exc}") from exc
