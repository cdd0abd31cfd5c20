"""Multi-role workflow over a persistent registry: the full cluster life cycle."""

import random

import pytest

from agencid.errors import (
    AuthFailureError,
    CapacityExhaustedError,
    DuplicateBoardError,
    DuplicateClusterError,
    DuplicateVendorError,
    InactiveBoardError,
    IntegrityError,
    NotFoundError,
    RegistryError,
    ScenarioError,
)
from agencid.pairing import make_engine
from agencid.pairing.base import Backend, EngineConfig
from agencid.workflow.containers import PackageHeader
from agencid.workflow.registry import Registry
from agencid.workflow.service import Workflow

from conftest import sym_config

PAYLOAD = b"bitstream image v1" * 8


def make_workflow(tmp_path, name="reg", config=None, seed=77):
    cfg = config if config is not None else sym_config()
    reg = Registry(tmp_path / name, passphrase="wf-test")
    return Workflow(reg, make_engine(cfg), rng=random.Random(seed))


def single_vendor(wf, capacity=4, families=("default",) * 4):
    wf.vendor_init("acme", capacity)
    boards = []
    for i, family in enumerate(families, start=1):
        rec = wf.register_board("acme", f"board-{i}", family)
        boards.append(rec["board_id"])
    return boards


# -- scenario detection ----------------------------------------------------


def test_scenario_one_single_vendor_single_family(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    info = wf.form_cluster("c1", boards[:2])
    assert info["scenario"] == 1
    assert info["families"] == ["default"]
    assert info["members"] == {"acme": [1, 2]}


def test_scenario_two_multiple_families(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf, families=("fpga-a", "fpga-a", "fpga-b", "fpga-b"))
    info = wf.form_cluster("c1", boards)
    assert info["scenario"] == 2
    assert info["families"] == ["fpga-a", "fpga-b"]


def test_scenario_three_multiple_vendors(tmp_path):
    wf = make_workflow(tmp_path)
    wf.vendor_init("acme", 2)
    wf.vendor_init("bolt", 2)
    wf.register_board("acme", "a1", "default")
    wf.register_board("bolt", "b1", "default")
    info = wf.form_cluster("c1", ["a1", "b1"])
    assert info["scenario"] == 3
    assert info["members"] == {"acme": [1], "bolt": [1]}


def test_scenario_hint_mismatch_rejected(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    with pytest.raises(ScenarioError, match="implies scenario 1, hint was 3"):
        wf.form_cluster("c1", boards[:2], scenario_hint=3)
    wf.form_cluster("c1", boards[:2], scenario_hint=1)


def test_empty_cluster_rejected(tmp_path):
    wf = make_workflow(tmp_path)
    single_vendor(wf)
    with pytest.raises(ScenarioError, match="at least one member"):
        wf.form_cluster("c1", [])


# -- member resolution -----------------------------------------------------


def test_members_by_bare_index_with_sole_vendor(tmp_path):
    wf = make_workflow(tmp_path)
    single_vendor(wf)
    info = wf.form_cluster("c1", [1, "3"])  # int and digit-string forms
    assert info["members"] == {"acme": [1, 3]}


def test_bare_index_needs_vendor_when_ambiguous(tmp_path):
    wf = make_workflow(tmp_path)
    wf.vendor_init("acme", 2)
    wf.vendor_init("bolt", 2)
    wf.register_board("acme", "a1", "default")
    wf.register_board("bolt", "b1", "default")
    with pytest.raises(NotFoundError, match="bare index"):
        wf.form_cluster("c1", [1])
    info = wf.form_cluster("c1", [1], vendor="bolt")
    assert info["members"] == {"bolt": [1]}


def test_unknown_member_tokens(tmp_path):
    wf = make_workflow(tmp_path)
    single_vendor(wf, capacity=2, families=("default", "default"))
    with pytest.raises(NotFoundError, match="not registered"):
        wf.form_cluster("c1", ["ghost"])
    with pytest.raises(NotFoundError, match="no active board at index"):
        wf.form_cluster("c1", [9])


def test_deregistered_member_rejected(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.deregister_board(boards[0])
    with pytest.raises(InactiveBoardError):
        wf.form_cluster("c1", [boards[0], boards[1]])


# -- encrypt / decrypt roundtrips ------------------------------------------


def test_scenario_one_roundtrip(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.form_cluster("c1", boards[:3])
    packages = wf.encrypt_package("c1", PAYLOAD, package_id="pkg")
    assert [p.package_id for p in packages] == ["pkg"]
    for board_id in boards[:3]:
        outcome = wf.decrypt_package(board_id, packages[0].data)
        assert not outcome.rejected
        assert outcome.reason == "ok"
        assert outcome.payload == PAYLOAD
    outcome = wf.decrypt_package(boards[3], packages[0].data)
    assert outcome.rejected
    assert outcome.reason == "not-in-cluster"
    assert outcome.payload is None


def test_scenario_two_family_packages(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf, families=("fpga-a", "fpga-a", "fpga-b", "fpga-b"))
    wf.form_cluster("c1", boards)
    packages = wf.encrypt_package("c1", PAYLOAD, package_id="rel")
    assert [p.package_id for p in packages] == ["rel-fpga-a", "rel-fpga-b"]
    assert [p.family for p in packages] == ["fpga-a", "fpga-b"]
    # One key encapsulation serves both family packages.
    assert packages[0].data != packages[1].data
    by_family = {p.family: p for p in packages}
    for board_id, family in zip(boards, ("fpga-a", "fpga-a", "fpga-b", "fpga-b")):
        outcome = wf.decrypt_package(board_id, by_family[family].data)
        assert outcome.payload == PAYLOAD


def test_scenario_three_vendor_packages_and_foreign_rejection(tmp_path):
    wf = make_workflow(tmp_path)
    wf.vendor_init("acme", 2)
    wf.vendor_init("bolt", 2)
    wf.register_board("acme", "a1", "default")
    wf.register_board("acme", "a2", "default")
    wf.register_board("bolt", "b1", "default")
    wf.form_cluster("c1", ["a1", "a2", "b1"])
    packages = wf.encrypt_package("c1", PAYLOAD, package_id="pkg")
    assert [p.package_id for p in packages] == ["pkg-acme", "pkg-bolt"]
    by_vendor = {p.vendor: p for p in packages}
    assert wf.decrypt_package("a1", by_vendor["acme"].data).payload == PAYLOAD
    assert wf.decrypt_package("a2", by_vendor["acme"].data).payload == PAYLOAD
    assert wf.decrypt_package("b1", by_vendor["bolt"].data).payload == PAYLOAD
    crossed = wf.decrypt_package("a1", by_vendor["bolt"].data)
    assert crossed.rejected
    assert crossed.reason == "foreign-vendor"


def test_roundtrip_on_production_backend(tmp_path):
    wf = make_workflow(
        tmp_path,
        config=EngineConfig(backend=Backend.PRODUCTION, rng_seed=9, testing_hooks=True),
    )
    boards = single_vendor(wf, capacity=2, families=("default", "default"))
    wf.form_cluster("c1", boards)
    packages = wf.encrypt_package("c1", PAYLOAD)
    assert wf.decrypt_package(boards[0], packages[0].data).payload == PAYLOAD
    assert wf.decrypt_package(boards[1], packages[0].data).payload == PAYLOAD


def test_persistence_across_instances(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.form_cluster("c1", boards[:2])
    packages = wf.encrypt_package("c1", PAYLOAD)
    # A fresh process over the same registry directory can decrypt and
    # produce new packages for the recorded cluster.
    wf2 = make_workflow(tmp_path)
    assert wf2.decrypt_package(boards[0], packages[0].data).payload == PAYLOAD
    more = wf2.encrypt_package("c1", b"second payload")
    assert wf.decrypt_package(boards[1], more[0].data).payload == b"second payload"


# -- decrypt preconditions -------------------------------------------------


def test_decrypt_unknown_board(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.form_cluster("c1", boards[:2])
    pkg = wf.encrypt_package("c1", PAYLOAD)[0]
    with pytest.raises(NotFoundError):
        wf.decrypt_package("ghost", pkg.data)


def test_decrypt_deregistered_board(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.form_cluster("c1", boards[:2])
    pkg = wf.encrypt_package("c1", PAYLOAD)[0]
    wf.deregister_board(boards[0])
    with pytest.raises(InactiveBoardError):
        wf.decrypt_package(boards[0], pkg.data)
    # The other cluster member is unaffected.
    assert wf.decrypt_package(boards[1], pkg.data).payload == PAYLOAD


def test_decrypt_rejects_baseline_package_marker(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    wf.form_cluster("c1", boards[:2])
    raw = bytearray(wf.encrypt_package("c1", PAYLOAD)[0].data)
    raw[5] |= 0x80  # per-board baseline marker on the backend byte
    with pytest.raises(IntegrityError, match="baseline"):
        wf.decrypt_package(boards[0], raw)


def test_decrypt_rejects_foreign_backend(tmp_path):
    sym = make_workflow(tmp_path, name="sym")
    prod = make_workflow(
        tmp_path,
        name="prod",
        config=EngineConfig(backend=Backend.PRODUCTION, rng_seed=9, testing_hooks=True),
    )
    for wf in (sym, prod):
        single_vendor(wf, capacity=2, families=("default", "default"))
        wf.form_cluster("c1", ["board-1", "board-2"])
    pkg = prod.encrypt_package("c1", PAYLOAD)[0]
    with pytest.raises(IntegrityError, match="backend"):
        sym.decrypt_package("board-1", pkg.data)


# -- tamper hardening ------------------------------------------------------


def test_every_byte_flip_is_detected(tmp_path):
    """Flip each byte of a package two ways: every variant must raise an
    authentication or integrity error.  No flip may decrypt, and none may
    downgrade to a polite membership rejection."""
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf, capacity=3, families=("default",) * 3)
    wf.form_cluster("c1", boards[:2])
    raw = wf.encrypt_package("c1", PAYLOAD, package_id="pkg")[0].data
    assert wf.decrypt_package(boards[0], raw).payload == PAYLOAD
    outcomes = {"raised": 0}
    for pos in range(len(raw)):
        for mask in (0x01, 0xFF):
            mutated = bytearray(raw)
            mutated[pos] ^= mask
            with pytest.raises((AuthFailureError, IntegrityError)):
                wf.decrypt_package(boards[0], bytes(mutated))
            outcomes["raised"] += 1
    assert outcomes["raised"] == 2 * len(raw)


def test_truncation_and_padding_detected(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf, capacity=2, families=("default", "default"))
    wf.form_cluster("c1", boards)
    raw = wf.encrypt_package("c1", PAYLOAD)[0].data
    with pytest.raises(IntegrityError):
        wf.decrypt_package(boards[0], raw[:-1])
    with pytest.raises(IntegrityError):
        wf.decrypt_package(boards[0], raw + b"\x00")


def test_stored_aggregate_key_corruption_detected(tmp_path):
    wf = make_workflow(tmp_path)
    single_vendor(wf)
    wf.form_cluster("c1", ["board-1", "board-2"])
    sub = wf.registry.state["clusters"]["c1"]["vendors"]["acme"]
    good = sub["aggregate_key"]
    sub["aggregate_key"] = good[:-2] + ("00" if good[-2:] != "00" else "01")
    with pytest.raises(IntegrityError):
        wf.encrypt_package("c1", PAYLOAD)
    sub["aggregate_key"] = good
    wf.encrypt_package("c1", PAYLOAD)


def test_swapped_aggregate_key_fails_membership_check(tmp_path):
    # Same indices, different vendor keyspace: the blob parses and names
    # the right cluster, so only recomputation can expose the swap.
    wf = make_workflow(tmp_path)
    wf.vendor_init("acme", 3)
    wf.vendor_init("bolt", 3)
    for vid in ("acme", "bolt"):
        wf.register_board(vid, f"{vid}-1", "default")
        wf.register_board(vid, f"{vid}-2", "default")
    wf.form_cluster("ca", ["acme-1", "acme-2"])
    wf.form_cluster("cb", ["bolt-1", "bolt-2"])
    clusters = wf.registry.state["clusters"]
    clusters["ca"]["vendors"]["acme"]["aggregate_key"] = clusters["cb"]["vendors"][
        "bolt"
    ]["aggregate_key"]
    with pytest.raises(IntegrityError, match="does not match the cluster membership"):
        wf.encrypt_package("ca", PAYLOAD)


# -- registry integration --------------------------------------------------


def test_duplicate_operations_rejected(tmp_path):
    wf = make_workflow(tmp_path)
    # Leave one index free so the duplicate id check is what fires.
    boards = single_vendor(wf, capacity=4, families=("default",) * 3)
    with pytest.raises(DuplicateVendorError):
        wf.vendor_init("acme", 2)
    with pytest.raises(DuplicateBoardError):
        wf.register_board("acme", boards[0], "default")
    wf.form_cluster("c1", boards[:2])
    with pytest.raises(DuplicateClusterError):
        wf.form_cluster("c1", boards[:2])
    with pytest.raises(NotFoundError):
        wf.register_board("ghost", "b9", "default")
    with pytest.raises(NotFoundError):
        wf.encrypt_package("nope", PAYLOAD)


def test_index_recycling_after_deregister(tmp_path):
    wf = make_workflow(tmp_path, seed=3)
    wf.vendor_init("acme", 2)
    assert wf.register_board("acme", "b1", "default")["index"] == 1
    assert wf.register_board("acme", "b2", "default")["index"] == 2
    with pytest.raises(CapacityExhaustedError):
        wf.register_board("acme", "b3", "default")
    wf.deregister_board("b1")
    rec = wf.register_board("acme", "b3", "default")
    assert rec["index"] == 1
    assert rec["status"] == "active"
    # The replacement board holds the same slot key, so it can open
    # packages addressed to clusters that include index 1.
    wf.form_cluster("c1", ["b3", "b2"])
    pkg = wf.encrypt_package("c1", PAYLOAD)[0]
    assert wf.decrypt_package("b3", pkg.data).payload == PAYLOAD
    with pytest.raises(InactiveBoardError):
        wf.decrypt_package("b1", pkg.data)


def test_engine_registry_mismatch(tmp_path):
    wf = make_workflow(tmp_path)
    single_vendor(wf, capacity=2, families=("default", "default"))
    reg = Registry(tmp_path / "reg", passphrase="wf-test")
    with pytest.raises(RegistryError, match="symbolic backend"):
        Workflow(reg, make_engine(EngineConfig(backend=Backend.PRODUCTION)))
    with pytest.raises(RegistryError, match="oracle modulus"):
        Workflow(reg, make_engine(sym_config(q=257)))


def test_registry_view_shape(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf, capacity=3, families=("fpga-a", "fpga-b", "fpga-a"))
    wf.deregister_board(boards[2])
    wf.form_cluster("c1", boards[:2])
    view = wf.registry_view()
    assert view["backend"] == "symbolic"
    assert view["entries"] == wf.registry.seq
    assert view["digest"] == wf.registry.digest()
    assert view["vendors"] == {"acme": {"capacity": 3, "keys_provisioned": 3}}
    assert view["boards"]["board-1"] == {
        "vendor": "acme",
        "index": 1,
        "family": "fpga-a",
        "status": "active",
    }
    assert view["boards"]["board-3"]["status"] == "deregistered"
    assert view["clusters"] == {
        "c1": {
            "scenario": 2,
            "families": ["fpga-a", "fpga-b"],
            "members": {"acme": [1, 2]},
        }
    }
    assert wf.replay_check()["ok"] is True


def test_cluster_indices_are_canonical(tmp_path):
    wf = make_workflow(tmp_path)
    boards = single_vendor(wf)
    info = wf.form_cluster("c1", [boards[2], boards[0], boards[1]])
    assert info["members"] == {"acme": [1, 2, 3]}
    pkg = wf.encrypt_package("c1", PAYLOAD)[0]
    header = PackageHeader(
        backend_id=wf.engine.backend.wire_id,
        vendor_id="acme",
        cluster_id="c1",
        package_id="pkg",
        cluster=(1, 2, 3),
    )
    assert pkg.data.startswith(header.to_bytes())
