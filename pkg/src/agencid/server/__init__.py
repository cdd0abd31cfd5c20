"""HTTP service wrapping the workflow layer."""

from agencid.server.app import build_workflow, create_app

__all__ = ["build_workflow", "create_app"]
