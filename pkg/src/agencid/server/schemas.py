"""Request and response bodies for the HTTP service.

Binary values cross the wire base64 encoded; every error response uses the
single ``ErrorBody`` shape so clients can map failures uniformly.
"""

from __future__ import annotations

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field


class VendorInitRequest(BaseModel):
    vendor_id: str = Field(min_length=1)
    capacity: int = Field(ge=1)


class VendorInitResponse(BaseModel):
    vendor: str
    capacity: int


class BoardRegisterRequest(BaseModel):
    vendor_id: str = Field(min_length=1)
    board_id: str = Field(min_length=1)
    family: str = Field(default="default", min_length=1)


class BoardRecord(BaseModel):
    board_id: str
    vendor: str
    index: int
    family: str
    status: str


class ClusterFormRequest(BaseModel):
    cluster_id: str = Field(min_length=1)
    # Board ids, or bare indices resolved against ``vendor``.
    members: List[Union[int, str]] = Field(min_length=1)
    vendor: Optional[str] = None
    scenario_hint: Optional[int] = Field(default=None, ge=1, le=3)


class ClusterFormResponse(BaseModel):
    cluster_id: str
    scenario: int
    families: List[str]
    members: Dict[str, List[int]]


class EncryptRequest(BaseModel):
    cluster_id: str = Field(min_length=1)
    payload_b64: str
    package_id: Optional[str] = None


class PackageOut(BaseModel):
    package_id: str
    vendor: str
    family: str
    data_b64: str


class EncryptResponse(BaseModel):
    packages: List[PackageOut]


class DecryptRequest(BaseModel):
    board_id: str = Field(min_length=1)
    package_b64: str


class DecryptResponse(BaseModel):
    status: Literal["ok", "rejected"]
    reason: str
    payload_b64: Optional[str] = None


class HealthResponse(BaseModel):
    status: str
    backend: str
    entries: int


class ErrorBody(BaseModel):
    error: str
    detail: str
