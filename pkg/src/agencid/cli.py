"""Command line interface for the board-cluster encryption workflow.

Every workflow verb runs against a registry directory on disk, or against a
running HTTP service when ``--server`` is given; the two modes accept the
same arguments and print the same output.  Exit codes: 0 success, 1 error,
3 clean rejection (board outside the cluster), 4 authentication or
integrity failure.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from agencid import __version__, bench, errors
from agencid.errors import AgencidError, AuthFailureError, IntegrityError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 3
EXIT_AUTH = 4

_REGISTRY_ENV = "AGENCID_REGISTRY"
_ENGINE_ENV = "AGENCID_ENGINE"
_SEED_ENV = "AGENCID_SEED"


# -- local and remote facades ----------------------------------------------
# Both return the same plain-dict shapes so command handlers stay mode blind.


class LocalApi:
    def __init__(self, args: argparse.Namespace) -> None:
        from agencid.server.app import build_workflow

        self.workflow = build_workflow(
            args.registry, engine=args.engine, seed=args.seed
        )

    def vendor_init(self, vendor_id: str, capacity: int) -> Dict[str, Any]:
        return self.workflow.vendor_init(vendor_id, capacity)

    def board_register(self, vendor_id: str, board_id: str, family: str) -> Dict[str, Any]:
        return self.workflow.register_board(vendor_id, board_id, family)

    def board_deregister(self, board_id: str) -> Dict[str, Any]:
        return self.workflow.deregister_board(board_id)

    def cluster_form(
        self,
        cluster_id: str,
        members: List[str],
        vendor: Optional[str],
        scenario_hint: Optional[int],
    ) -> Dict[str, Any]:
        return self.workflow.form_cluster(
            cluster_id, members, vendor=vendor, scenario_hint=scenario_hint
        )

    def encrypt(
        self, cluster_id: str, payload: bytes, package_id: Optional[str]
    ) -> List[Dict[str, Any]]:
        packages = self.workflow.encrypt_package(
            cluster_id, payload, package_id=package_id
        )
        return [
            {
                "package_id": p.package_id,
                "vendor": p.vendor,
                "family": p.family,
                "data": p.data,
            }
            for p in packages
        ]

    def decrypt(self, board_id: str, data: bytes) -> Dict[str, Any]:
        outcome = self.workflow.decrypt_package(board_id, data)
        if outcome.rejected:
            return {"status": "rejected", "reason": outcome.reason, "payload": None}
        return {"status": "ok", "reason": outcome.reason, "payload": outcome.payload}

    def registry_view(self) -> Dict[str, Any]:
        return self.workflow.registry_view()

    def replay_check(self) -> Dict[str, Any]:
        return self.workflow.replay_check()


class RemoteApi:
    """Thin client: same facade, but each call is an HTTP request."""

    def __init__(self, args: argparse.Namespace, client=None) -> None:
        if client is None:
            import httpx

            client = httpx.Client(base_url=args.server, timeout=30.0)
        self.client = client

    def _unwrap(self, resp) -> Any:
        if resp.status_code < 400:
            return resp.json()
        try:
            body = resp.json()
            name, detail = body["error"], body["detail"]
        except (ValueError, KeyError):
            raise AgencidError(f"server error {resp.status_code}: {resp.text[:200]}")
        exc_type = getattr(errors, name, None)
        if isinstance(exc_type, type) and issubclass(exc_type, AgencidError):
            raise exc_type(detail)
        if resp.status_code == 422:
            raise AuthFailureError(detail)
        raise AgencidError(detail)

    def vendor_init(self, vendor_id: str, capacity: int) -> Dict[str, Any]:
        return self._unwrap(
            self.client.post(
                "/vendors", json={"vendor_id": vendor_id, "capacity": capacity}
            )
        )

    def board_register(self, vendor_id: str, board_id: str, family: str) -> Dict[str, Any]:
        return self._unwrap(
            self.client.post(
                "/boards",
                json={"vendor_id": vendor_id, "board_id": board_id, "family": family},
            )
        )

    def board_deregister(self, board_id: str) -> Dict[str, Any]:
        return self._unwrap(self.client.delete(f"/boards/{board_id}"))

    def cluster_form(
        self,
        cluster_id: str,
        members: List[str],
        vendor: Optional[str],
        scenario_hint: Optional[int],
    ) -> Dict[str, Any]:
        return self._unwrap(
            self.client.post(
                "/clusters",
                json={
                    "cluster_id": cluster_id,
                    "members": members,
                    "vendor": vendor,
                    "scenario_hint": scenario_hint,
                },
            )
        )

    def encrypt(
        self, cluster_id: str, payload: bytes, package_id: Optional[str]
    ) -> List[Dict[str, Any]]:
        out = self._unwrap(
            self.client.post(
                "/packages/encrypt",
                json={
                    "cluster_id": cluster_id,
                    "payload_b64": base64.b64encode(payload).decode(),
                    "package_id": package_id,
                },
            )
        )
        return [
            {
                "package_id": p["package_id"],
                "vendor": p["vendor"],
                "family": p["family"],
                "data": base64.b64decode(p["data_b64"]),
            }
            for p in out["packages"]
        ]

    def decrypt(self, board_id: str, data: bytes) -> Dict[str, Any]:
        out = self._unwrap(
            self.client.post(
                "/packages/decrypt",
                json={
                    "board_id": board_id,
                    "package_b64": base64.b64encode(data).decode(),
                },
            )
        )
        payload = None
        if out.get("payload_b64") is not None:
            payload = base64.b64decode(out["payload_b64"])
        return {"status": out["status"], "reason": out["reason"], "payload": payload}

    def registry_view(self) -> Dict[str, Any]:
        return self._unwrap(self.client.get("/registry"))

    def replay_check(self) -> Dict[str, Any]:
        return self._unwrap(self.client.get("/registry/replay-check"))


def _make_api(args: argparse.Namespace, remote_client=None):
    if remote_client is not None or args.server:
        return RemoteApi(args, client=remote_client)
    return LocalApi(args)


# -- command handlers ------------------------------------------------------


def _cmd_vendor_init(args, api) -> int:
    out = api.vendor_init(args.vendor, args.capacity)
    print(f"vendor {out['vendor']} initialized with capacity {out['capacity']}")
    return EXIT_OK


def _cmd_board_register(args, api) -> int:
    out = api.board_register(args.vendor, args.board_id, args.family)
    print(
        f"board {out['board_id']} registered: vendor={out['vendor']} "
        f"index={out['index']} family={out['family']}"
    )
    return EXIT_OK


def _cmd_board_deregister(args, api) -> int:
    out = api.board_deregister(args.board_id)
    print(f"board {out['board_id']} deregistered (index {out['index']} freed)")
    return EXIT_OK


def _cmd_cluster_form(args, api) -> int:
    members = [tok.strip() for tok in args.boards.split(",") if tok.strip()]
    out = api.cluster_form(args.cluster_id, members, args.vendor, args.scenario)
    formed = "; ".join(
        f"{vid}:{idx}" for vid, idxs in sorted(out["members"].items()) for idx in idxs
    )
    print(
        f"cluster {out['cluster_id']} formed: scenario={out['scenario']} "
        f"families={','.join(out['families'])} members=[{formed}]"
    )
    return EXIT_OK


def _cmd_ipp_encrypt(args, api) -> int:
    payload = Path(args.payload).read_bytes()
    packages = api.encrypt(args.cluster_id, payload, args.package_id)
    out = Path(args.out)
    if len(packages) > 1 or out.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{p['package_id']}.agid" for p in packages]
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        paths = [out]
    for p, path in zip(packages, paths):
        path.write_bytes(p["data"])
        print(f"wrote {path} ({len(p['data'])} bytes, package {p['package_id']})")
    return EXIT_OK


def _cmd_board_decrypt(args, api) -> int:
    data = Path(args.package).read_bytes()
    out = api.decrypt(args.board_id, data)
    if out["status"] == "rejected":
        print(f"rejected: {out['reason']}", file=sys.stderr)
        return EXIT_REJECTED
    if args.out:
        Path(args.out).write_bytes(out["payload"])
        print(f"ok: wrote {args.out} ({len(out['payload'])} bytes)")
    else:
        sys.stdout.buffer.write(out["payload"])
        sys.stdout.buffer.flush()
        print("ok", file=sys.stderr)
    return EXIT_OK


def _cmd_registry_show(args, api) -> int:
    if args.replay_check:
        out = api.replay_check()
        print(
            f"entries={out['entries']} digest={out['replayed_digest']} "
            f"replay={'ok' if out['ok'] else 'MISMATCH'}"
        )
        return EXIT_OK if out["ok"] else EXIT_ERROR
    view = api.registry_view()
    if args.as_json:
        print(json.dumps(view, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"registry: {view['entries']} entries, digest {view['digest'][:16]}...")
    for vid, v in view["vendors"].items():
        print(f"  vendor {vid}: capacity={v['capacity']} keys={v['keys_provisioned']}")
    for bid, b in view["boards"].items():
        print(
            f"  board {bid}: vendor={b['vendor']} index={b['index']} "
            f"family={b['family']} status={b['status']}"
        )
    for cid, c in view["clusters"].items():
        members = "; ".join(
            f"{vid}:{idx}" for vid, idxs in sorted(c["members"].items()) for idx in idxs
        )
        print(f"  cluster {cid}: scenario={c['scenario']} members=[{members}]")
    return EXIT_OK


def _bench_engine(args):
    from agencid.pairing import make_engine
    from agencid.pairing.base import Backend, EngineConfig

    return make_engine(
        EngineConfig(backend=Backend(args.engine), rng_seed=args.seed)
    )


def _cmd_bench_run(args, api) -> int:
    engine = _bench_engine(args)
    experiments = [1, 2, 3, 4] if args.experiment == "all" else [int(args.experiment)]
    seed = args.seed if args.seed is not None else 2024
    records = []
    for exp in experiments:
        plan = bench.default_plan(exp, repetitions=args.repetitions, seed=seed)
        records.extend(bench.run_experiment(engine, plan))
        print(f"experiment {exp}: {len(records)} rows so far", file=sys.stderr)
    bench.write_csv(args.out, records)
    print(f"wrote {args.out} ({len(records)} rows)")
    if args.plot:
        for path in bench.write_plots(records, args.plot):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_bench_assert(args, api) -> int:
    records = bench.read_csv(args.input)
    report = bench.fit_and_assert(records)
    print(report)
    return EXIT_OK if report.ok else EXIT_ERROR


def _cmd_serve(args, api) -> int:
    import uvicorn

    from agencid.server.app import build_workflow, create_app

    workflow = build_workflow(args.registry, engine=args.engine, seed=args.seed)
    app = create_app(workflow)
    print(f"serving registry {args.registry} on {args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agencid",
        description="Aggregate-key encryption workflow for FPGA board clusters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--registry",
        default=os.environ.get(_REGISTRY_ENV, "./agencid-registry"),
        help="registry directory (default: $AGENCID_REGISTRY or ./agencid-registry)",
    )
    parser.add_argument(
        "--engine",
        choices=["production", "symbolic"],
        default=os.environ.get(_ENGINE_ENV, "production"),
        help="pairing engine (default: $AGENCID_ENGINE or production)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=(int(os.environ[_SEED_ENV]) if _SEED_ENV in os.environ else None),
        help="deterministic RNG seed (default: system entropy)",
    )
    parser.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="run against an HTTP service instead of a local registry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vendor-init", help="provision a vendor keyspace")
    p.add_argument("--vendor", required=True)
    p.add_argument("--capacity", type=int, required=True, help="maximum board count")
    p.set_defaults(func=_cmd_vendor_init)

    p = sub.add_parser("board-register", help="enroll a board at the lowest free index")
    p.add_argument("--vendor", required=True)
    p.add_argument("--board-id", required=True)
    p.add_argument("--family", default="default", help="device family label")
    p.set_defaults(func=_cmd_board_register)

    p = sub.add_parser("board-deregister", help="retire a board and free its index")
    p.add_argument("--board-id", required=True)
    p.set_defaults(func=_cmd_board_deregister)

    p = sub.add_parser("cluster-form", help="form a cluster and extract aggregate keys")
    p.add_argument("--cluster-id", required=True)
    p.add_argument(
        "--boards",
        required=True,
        help="comma separated board ids or indices, e.g. b1,b3 or 1,3",
    )
    p.add_argument("--vendor", default=None, help="vendor for bare indices")
    p.add_argument("--scenario", type=int, default=None, choices=[1, 2, 3])
    p.set_defaults(func=_cmd_cluster_form)

    p = sub.add_parser("ipp-encrypt", help="encrypt a payload file for a cluster")
    p.add_argument("--cluster-id", required=True)
    p.add_argument("--payload", required=True, help="payload file to encrypt")
    p.add_argument(
        "--out",
        required=True,
        help="output file, or directory when several packages are produced",
    )
    p.add_argument("--package-id", default=None)
    p.set_defaults(func=_cmd_ipp_encrypt)

    p = sub.add_parser("board-decrypt", help="decrypt a package as a board")
    p.add_argument("--board-id", required=True)
    p.add_argument("--package", required=True, help="package file to decrypt")
    p.add_argument("--out", default=None, help="payload output (default: stdout)")
    p.set_defaults(func=_cmd_board_decrypt)

    p = sub.add_parser("registry-show", help="print the registry state")
    p.add_argument("--json", dest="as_json", action="store_true")
    p.add_argument(
        "--replay-check",
        action="store_true",
        help="re-replay the journal and compare digests",
    )
    p.set_defaults(func=_cmd_registry_show)

    p = sub.add_parser("bench", help="benchmark experiments")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)
    q = bench_sub.add_parser("run", help="run experiments and write a CSV")
    q.add_argument("--experiment", choices=["1", "2", "3", "4", "all"], required=True)
    q.add_argument("--out", required=True, help="CSV output path")
    q.add_argument("--repetitions", type=int, default=bench.MIN_TIMING_REPS)
    q.add_argument("--plot", default=None, metavar="DIR", help="also write PNG plots")
    q.set_defaults(func=_cmd_bench_run)
    q = bench_sub.add_parser("assert", help="check claims against a CSV")
    q.add_argument("--input", required=True, help="CSV produced by bench run")
    q.set_defaults(func=_cmd_bench_assert)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None, remote_client=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.func in (_cmd_bench_run, _cmd_bench_assert, _cmd_serve):
            api = None
        else:
            api = _make_api(args, remote_client)
        return args.func(args, api)
    except (AuthFailureError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except AgencidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
