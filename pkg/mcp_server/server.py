"""FastMCP server wiring for the flow app."""

from __future__ import annotations

import json
import logging
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, AsyncIterator, Dict, Optional

from mcp.server.fastmcp import FastMCP

from deskpd.errors import DeskPdError
from deskpd.flow import FlowApp

logger = logging.getLogger(__name__)


def _dump_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def _error(exc: Exception) -> Dict[str, Any]:
    return {"ok": False, "error": type(exc).__name__, "message": str(exc)}


def build_server(app: FlowApp, *, name: str, version: str) -> FastMCP:
    """Create a FastMCP server exposing flow runs, single steps, reports and rendering."""

    @asynccontextmanager
    async def lifespan(_: FastMCP) -> AsyncIterator[None]:
        await app.start()
        try:
            yield None
        finally:
            await app.stop()

    mcp = FastMCP(name=name, lifespan=lifespan)

    @mcp.resource("flow://config")
    async def config_resource() -> str:
        """Active flow configuration."""
        return _dump_json(app.config.model_dump(mode="json"))

    @mcp.resource("flow://report/{directory}")
    async def report_resource(directory: str) -> str:
        """Run report of a sibling of the configured output directory, by name."""
        report = app.load_report(app.output_dir.parent / directory)
        logger.info("Resource report dir=%s steps=%s", directory, len(report.steps))
        return _dump_json(report.model_dump(mode="json"))

    @mcp.tool()
    async def run_flow(config_path: Optional[str] = None) -> Dict[str, Any]:
        """Run every configured step; optionally switch to another config file first."""
        try:
            if config_path:
                app.use_config(Path(config_path))
            report = await app.run_flow_async()
        except DeskPdError as exc:
            logger.info("Tool run_flow failed error=%s", exc)
            return _error(exc)
        payload = {"ok": True, "output_dir": str(app.output_dir), **report.model_dump(mode="json")}
        logger.info("Tool run_flow design=%s steps=%s", report.design, len(report.steps))
        return payload

    @mcp.tool()
    async def run_step(name: str, checkpoint_path: Optional[str] = None) -> Dict[str, Any]:
        """Run one step (floorplan, place, cts, opt, route, sta, power) on a checkpoint DEF."""
        try:
            outcome, path = await app.run_step_async(
                name, Path(checkpoint_path) if checkpoint_path else None
            )
        except DeskPdError as exc:
            logger.info("Tool run_step name=%s failed error=%s", name, exc)
            return _error(exc)
        logger.info("Tool run_step name=%s checkpoint=%s", name, path)
        return {"ok": True, "checkpoint": str(path), **outcome.report.model_dump(mode="json")}

    @mcp.tool()
    async def get_report(directory: Optional[str] = None) -> Dict[str, Any]:
        """Return the run report of an output directory (the configured one by default)."""
        try:
            report = app.load_report(Path(directory) if directory else None)
        except FileNotFoundError as exc:
            return _error(exc)
        logger.info(
            "Tool get_report dir=%s steps=%s", directory or app.output_dir, len(report.steps)
        )
        return report.model_dump(mode="json")

    @mcp.tool()
    async def render_layout(def_path: str, svg_path: Optional[str] = None) -> Dict[str, Any]:
        """Render a DEF checkpoint to SVG; returns the SVG text unless svg_path is given."""
        try:
            svg = await app.render_async(Path(def_path))
        except (DeskPdError, FileNotFoundError) as exc:
            return _error(exc)
        if svg_path:
            Path(svg_path).write_text(svg, encoding="utf-8")
            logger.info("Tool render_layout def=%s svg=%s", def_path, svg_path)
            return {"ok": True, "svg_path": svg_path, "bytes": len(svg)}
        logger.info("Tool render_layout def=%s bytes=%s", def_path, len(svg))
        return {"ok": True, "svg": svg}

    logger.debug("Built MCP server name=%s version=%s", name, version)
    return mcp
