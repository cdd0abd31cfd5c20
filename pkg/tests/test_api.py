"""HTTP service: endpoint contracts, status-code mapping, error bodies."""

import base64

import pytest
from fastapi.testclient import TestClient

from agencid.server import build_workflow, create_app

PAYLOAD = b"payload under test" * 4
PAYLOAD_B64 = base64.b64encode(PAYLOAD).decode()


@pytest.fixture
def client(tmp_path):
    wf = build_workflow(tmp_path / "reg", engine="symbolic", seed=11)
    with TestClient(create_app(wf)) as c:
        yield c


def provision(client, boards=3, capacity=4):
    assert client.post(
        "/vendors", json={"vendor_id": "acme", "capacity": capacity}
    ).status_code == 201
    ids = []
    for i in range(1, boards + 1):
        r = client.post(
            "/boards", json={"vendor_id": "acme", "board_id": f"b{i}"}
        )
        assert r.status_code == 201
        ids.append(r.json()["board_id"])
    return ids


def form(client, members, cluster_id="c1", **extra):
    r = client.post(
        "/clusters", json={"cluster_id": cluster_id, "members": members, **extra}
    )
    assert r.status_code == 201, r.text
    return r.json()


def encrypt_one(client, cluster_id="c1"):
    r = client.post(
        "/packages/encrypt",
        json={"cluster_id": cluster_id, "payload_b64": PAYLOAD_B64},
    )
    assert r.status_code == 200, r.text
    return r.json()["packages"]


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["backend"] == "symbolic"
    assert body["entries"] == 0  # journal starts at first vendor init
    provision(client, boards=1)
    assert client.get("/health").json()["entries"] == 3


def test_provision_and_cluster_shapes(client):
    provision(client)
    info = form(client, ["b1", "b2"])
    assert info == {
        "cluster_id": "c1",
        "scenario": 1,
        "families": ["default"],
        "members": {"acme": [1, 2]},
    }


def test_board_record_shape(client):
    client.post("/vendors", json={"vendor_id": "acme", "capacity": 2})
    rec = client.post(
        "/boards", json={"vendor_id": "acme", "board_id": "b1", "family": "fpga-a"}
    ).json()
    assert rec == {
        "board_id": "b1",
        "vendor": "acme",
        "index": 1,
        "family": "fpga-a",
        "status": "active",
    }


def test_encrypt_decrypt_roundtrip(client):
    boards = provision(client)
    form(client, boards[:2])
    packages = encrypt_one(client)
    assert len(packages) == 1
    pkg = packages[0]
    assert pkg["package_id"] == "pkg"
    assert pkg["vendor"] == "acme"
    for board in boards[:2]:
        body = client.post(
            "/packages/decrypt",
            json={"board_id": board, "package_b64": pkg["data_b64"]},
        ).json()
        assert body["status"] == "ok"
        assert body["reason"] == "ok"
        assert base64.b64decode(body["payload_b64"]) == PAYLOAD


def test_rejection_is_200_with_status(client):
    boards = provision(client)
    form(client, boards[:2])
    pkg = encrypt_one(client)[0]
    r = client.post(
        "/packages/decrypt",
        json={"board_id": boards[2], "package_b64": pkg["data_b64"]},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "rejected"
    assert body["reason"] == "not-in-cluster"
    assert body["payload_b64"] is None


def test_tamper_maps_to_422(client):
    boards = provision(client)
    form(client, boards[:2])
    raw = bytearray(base64.b64decode(encrypt_one(client)[0]["data_b64"]))
    raw[-1] ^= 0x01
    r = client.post(
        "/packages/decrypt",
        json={
            "board_id": boards[0],
            "package_b64": base64.b64encode(bytes(raw)).decode(),
        },
    )
    assert r.status_code == 422
    body = r.json()
    assert body["error"] == "AuthFailureError"
    assert "detail" in body


def test_duplicate_conflicts_map_to_409(client):
    provision(client, boards=1)
    r = client.post("/vendors", json={"vendor_id": "acme", "capacity": 4})
    assert r.status_code == 409
    assert r.json()["error"] == "DuplicateVendorError"
    r = client.post("/boards", json={"vendor_id": "acme", "board_id": "b1"})
    assert r.status_code == 409
    assert r.json()["error"] == "DuplicateBoardError"


def test_capacity_exhausted_maps_to_409(client):
    provision(client, boards=2, capacity=2)
    r = client.post("/boards", json={"vendor_id": "acme", "board_id": "b3"})
    assert r.status_code == 409
    assert r.json()["error"] == "CapacityExhaustedError"


def test_unknown_resources_map_to_404(client):
    assert client.post(
        "/boards", json={"vendor_id": "ghost", "board_id": "b1"}
    ).status_code == 404
    assert client.delete("/boards/ghost").status_code == 404
    assert client.post(
        "/packages/encrypt", json={"cluster_id": "nope", "payload_b64": PAYLOAD_B64}
    ).status_code == 404
    r = client.post(
        "/packages/decrypt", json={"board_id": "ghost", "package_b64": PAYLOAD_B64}
    )
    assert r.status_code == 404
    assert r.json()["error"] == "NotFoundError"


def test_malformed_requests_map_to_400(client):
    # Pydantic validation failures are client errors, not integrity
    # failures, so they must not surface as 422.
    r = client.post("/vendors", json={"vendor_id": "acme"})
    assert r.status_code == 400
    assert r.json()["error"] == "RequestValidationError"
    r = client.post("/vendors", json={"vendor_id": "acme", "capacity": 0})
    assert r.status_code == 400
    # Broken base64 is likewise a transport problem, not tampering.
    provision(client, boards=1, capacity=1)
    form(client, ["b1"])
    r = client.post(
        "/packages/decrypt", json={"board_id": "b1", "package_b64": "@@@not-base64"}
    )
    assert r.status_code == 400
    assert r.json()["error"] == "AgencidError"


def test_scenario_hint_mismatch_maps_to_400(client):
    provision(client)
    r = client.post(
        "/clusters",
        json={"cluster_id": "c1", "members": ["b1"], "scenario_hint": 3},
    )
    assert r.status_code == 400
    assert r.json()["error"] == "ScenarioError"


def test_deregister_then_decrypt_maps_to_400(client):
    boards = provision(client)
    form(client, boards[:2])
    pkg = encrypt_one(client)[0]
    r = client.delete(f"/boards/{boards[0]}")
    assert r.status_code == 200
    assert r.json()["status"] == "deregistered"
    # Asking an inactive board to decrypt is a client error, not an
    # authentication failure, so it stays off the 422 channel.
    r = client.post(
        "/packages/decrypt",
        json={"board_id": boards[0], "package_b64": pkg["data_b64"]},
    )
    assert r.status_code == 400
    assert r.json()["error"] == "InactiveBoardError"


def test_multi_vendor_packages(client):
    client.post("/vendors", json={"vendor_id": "acme", "capacity": 2})
    client.post("/vendors", json={"vendor_id": "bolt", "capacity": 2})
    client.post("/boards", json={"vendor_id": "acme", "board_id": "a1"})
    client.post("/boards", json={"vendor_id": "bolt", "board_id": "b1"})
    info = form(client, ["a1", "b1"])
    assert info["scenario"] == 3
    packages = encrypt_one(client)
    assert sorted(p["package_id"] for p in packages) == ["pkg-acme", "pkg-bolt"]
    by_vendor = {p["vendor"]: p for p in packages}
    body = client.post(
        "/packages/decrypt",
        json={"board_id": "a1", "package_b64": by_vendor["bolt"]["data_b64"]},
    ).json()
    assert body == {"status": "rejected", "reason": "foreign-vendor", "payload_b64": None}


def test_registry_and_replay_endpoints(client):
    provision(client, boards=1)
    view = client.get("/registry").json()
    assert view["backend"] == "symbolic"
    assert view["vendors"]["acme"]["capacity"] == 4
    assert view["boards"]["b1"]["status"] == "active"
    report = client.get("/registry/replay-check").json()
    assert report["ok"] is True
    assert report["entries"] == view["entries"]
    assert report["replayed_digest"] == view["digest"]


def test_workflow_state_is_shared_with_service(tmp_path):
    # The service wraps the same registry directory the library uses, so
    # out-of-band clients see requests made through HTTP.
    wf = build_workflow(tmp_path / "reg", engine="symbolic", seed=11)
    with TestClient(create_app(wf)) as c:
        provision(c, boards=2, capacity=2)
        form(c, ["b1", "b2"])
        pkg_b64 = encrypt_one(c)[0]["data_b64"]
    outcome = wf.decrypt_package("b1", base64.b64decode(pkg_b64))
    assert outcome.payload == PAYLOAD
