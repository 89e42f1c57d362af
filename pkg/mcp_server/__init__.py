"""MCP server exposing the physical design flow."""

from __future__ import annotations

from .server import build_server

__all__ = ["build_server"]
