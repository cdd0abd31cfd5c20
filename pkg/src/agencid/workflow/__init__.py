"""Multi-role workflow: registry persistence, package containers, services."""

from agencid.workflow.containers import EncryptedPackage, PackageHeader
from agencid.workflow.registry import Registry
from agencid.workflow.service import DecryptOutcome, PackageFile, Workflow

__all__ = [
    "DecryptOutcome",
    "EncryptedPackage",
    "PackageFile",
    "PackageHeader",
    "Registry",
    "Workflow",
]
