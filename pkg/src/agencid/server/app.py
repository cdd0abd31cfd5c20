"""FastAPI application exposing the multi-role workflow over HTTP.

Vendors provision keyspaces, boards register into them, cloud service
providers form clusters, and IP providers encrypt packages; boards decrypt.
A legitimate out-of-cluster board gets a 200 with status ``rejected``,
while tampering and key corruption surface as 422 responses.
"""

from __future__ import annotations

import base64
import binascii
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from agencid import __version__
from agencid.errors import (
    AgencidError,
    AuthFailureError,
    CapacityExhaustedError,
    DuplicateBoardError,
    DuplicateClusterError,
    DuplicateVendorError,
    IntegrityError,
    NotFoundError,
)
from agencid.pairing import make_engine
from agencid.pairing.base import Backend, EngineConfig
from agencid.server import schemas
from agencid.workflow import Registry, Workflow

_STATUS_CODES = (
    (NotFoundError, 404),
    (DuplicateVendorError, 409),
    (DuplicateBoardError, 409),
    (DuplicateClusterError, 409),
    (CapacityExhaustedError, 409),
    (AuthFailureError, 422),
    (IntegrityError, 422),
    (AgencidError, 400),
)


def build_workflow(
    registry_dir: Union[str, Path],
    engine: str = "production",
    seed: Optional[int] = None,
    oracle_modulus: int = 101,
    passphrase: Optional[str] = None,
) -> Workflow:
    backend = Backend(engine)
    config = EngineConfig(
        backend=backend, oracle_modulus=oracle_modulus, rng_seed=seed
    )
    registry = Registry(Path(registry_dir), passphrase=passphrase)
    return Workflow(registry, make_engine(config))


def _b64decode(value: str, what: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as exc:
        # Malformed transport encoding is a client error, not tampering.
        raise AgencidError(f"{what} is not valid base64") from exc


def create_app(workflow: Workflow) -> FastAPI:
    app = FastAPI(title="agencid", version=__version__)

    def _error_response(status: int, exc: Exception) -> JSONResponse:
        body = schemas.ErrorBody(error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    for exc_type, status in _STATUS_CODES:
        def handler(request: Request, exc: Exception, status: int = status) -> JSONResponse:
            return _error_response(status, exc)

        app.add_exception_handler(exc_type, handler)

    # Malformed request bodies get the uniform error shape with a 400, so
    # a 422 always means an authentication or integrity failure.
    def validation_handler(request: Request, exc: Exception) -> JSONResponse:
        return _error_response(400, exc)

    app.add_exception_handler(RequestValidationError, validation_handler)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(
            status="ok",
            backend=workflow.engine.backend.value,
            entries=workflow.registry.seq,
        )

    @app.post("/vendors", response_model=schemas.VendorInitResponse, status_code=201)
    def vendor_init(req: schemas.VendorInitRequest) -> schemas.VendorInitResponse:
        out = workflow.vendor_init(req.vendor_id, req.capacity)
        return schemas.VendorInitResponse(**out)

    @app.post("/boards", response_model=schemas.BoardRecord, status_code=201)
    def board_register(req: schemas.BoardRegisterRequest) -> schemas.BoardRecord:
        out = workflow.register_board(req.vendor_id, req.board_id, req.family)
        return schemas.BoardRecord(
            board_id=out["board_id"],
            vendor=out["vendor"],
            index=out["index"],
            family=out["family"],
            status=out["status"],
        )

    @app.delete("/boards/{board_id}", response_model=schemas.BoardRecord)
    def board_deregister(board_id: str) -> schemas.BoardRecord:
        out = workflow.deregister_board(board_id)
        return schemas.BoardRecord(
            board_id=out["board_id"],
            vendor=out["vendor"],
            index=out["index"],
            family=out["family"],
            status=out["status"],
        )

    @app.post("/clusters", response_model=schemas.ClusterFormResponse, status_code=201)
    def cluster_form(req: schemas.ClusterFormRequest) -> schemas.ClusterFormResponse:
        out = workflow.form_cluster(
            req.cluster_id,
            req.members,
            vendor=req.vendor,
            scenario_hint=req.scenario_hint,
        )
        return schemas.ClusterFormResponse(**out)

    @app.post("/packages/encrypt", response_model=schemas.EncryptResponse)
    def encrypt(req: schemas.EncryptRequest) -> schemas.EncryptResponse:
        payload = _b64decode(req.payload_b64, "payload")
        packages = workflow.encrypt_package(
            req.cluster_id, payload, package_id=req.package_id
        )
        return schemas.EncryptResponse(
            packages=[
                schemas.PackageOut(
                    package_id=p.package_id,
                    vendor=p.vendor,
                    family=p.family,
                    data_b64=base64.b64encode(p.data).decode(),
                )
                for p in packages
            ]
        )

    @app.post("/packages/decrypt", response_model=schemas.DecryptResponse)
    def decrypt(req: schemas.DecryptRequest) -> schemas.DecryptResponse:
        data = _b64decode(req.package_b64, "package")
        outcome = workflow.decrypt_package(req.board_id, data)
        if outcome.rejected:
            return schemas.DecryptResponse(status="rejected", reason=outcome.reason)
        return schemas.DecryptResponse(
            status="ok",
            reason=outcome.reason,
            payload_b64=base64.b64encode(outcome.payload).decode(),
        )

    @app.get("/registry")
    def registry_view() -> dict:
        return workflow.registry_view()

    @app.get("/registry/replay-check")
    def replay_check() -> dict:
        return workflow.replay_check()

    return app
