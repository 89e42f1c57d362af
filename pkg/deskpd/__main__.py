"""Command-line entry point: flow runs, single steps, reports, rendering and the MCP server."""

from __future__ import annotations

import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys
from typing import List, Optional

from . import __version__
from .benchgen import PRESETS, BenchSpec, write_bench
from .config import Settings, load_settings
from .errors import DeskPdError, StepFailed
from .flow import FlowApp, format_run_report
from .logging_utils import setup_logging
from .models import STEP_ORDER

logger = logging.getLogger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="deskpd", description="Desk-scale physical design flow")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker cap (default DESKPD_THREADS)"
    )
    parser.add_argument(
        "--log-level", default=None, help="Logging level (default DESKPD_LOG_LEVEL)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the configured steps")
    run.add_argument("--config", type=Path, default=None, help="Flow config YAML")

    step = sub.add_parser("step", help="Run one step on a checkpoint DEF")
    step.add_argument("name", choices=STEP_ORDER)
    step.add_argument(
        "--in", dest="checkpoint", type=Path, default=None, help="Input checkpoint DEF"
    )
    step.add_argument("--config", type=Path, default=None, help="Flow config YAML")

    report = sub.add_parser("report", help="Print the report of a finished run")
    report.add_argument("--dir", type=Path, required=True, help="Run output directory")
    report.add_argument("--json", action="store_true", help="Print raw JSON")

    render = sub.add_parser("render", help="Render a DEF to SVG")
    render.add_argument("--in", dest="checkpoint", type=Path, required=True)
    render.add_argument("--out", type=Path, required=True)
    render.add_argument("--config", type=Path, default=None, help="Flow config naming the tech LEF")

    gen = sub.add_parser("generate", help="Write a synthetic benchmark netlist and SDC")
    gen.add_argument("preset", choices=sorted(PRESETS))
    gen.add_argument("--out", type=Path, default=Path("."))
    gen.add_argument("--seed", type=int, default=None)

    serve = sub.add_parser("serve", help="Run the MCP server")
    serve.add_argument(
        "--transport",
        default="stdio",
        help="MCP transport to use (stdio, http, streamable-http, etc.)",
    )
    serve.add_argument("--host", default="127.0.0.1", help="Host for HTTP transports")
    serve.add_argument("--port", default=8000, type=int, help="Port for HTTP transports")
    return parser.parse_args(argv)


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings()
    if args.threads is not None:
        settings = replace(settings, threads=max(1, args.threads))
    if getattr(args, "config", None) is not None:
        settings = replace(settings, config_file=args.config)
    return settings


def _serve(args: argparse.Namespace, app: FlowApp) -> None:
    from mcp_server.server import build_server

    server = build_server(app, name="deskpd", version=__version__)
    run_kwargs = {"transport": args.transport}
    if args.transport in {"http", "streamable-http", "sse"}:
        run_kwargs["host"] = args.host
        run_kwargs["port"] = args.port
    try:
        server.run(**run_kwargs)
    except KeyboardInterrupt:
        sys.exit(0)


def run(args: argparse.Namespace) -> int:
    settings = _settings(args)
    app = FlowApp(settings)
    if args.command == "run":
        report = app.run_flow()
        print(format_run_report(report), end="")
    elif args.command == "step":
        text = args.checkpoint.read_text(encoding="utf-8") if args.checkpoint else None
        outcome = app.run_step(args.name, text)
        path = app.write_step(outcome)
        print(f"{args.name}: wrote {path}")
    elif args.command == "report":
        report = app.load_report(args.dir)
        if args.json:
            print(report.model_dump_json(indent=2))
        else:
            print(format_run_report(report), end="")
    elif args.command == "render":
        args.out.write_text(app.render(args.checkpoint), encoding="utf-8")
        print(f"wrote {args.out}")
    elif args.command == "generate":
        spec: BenchSpec = PRESETS[args.preset]
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        v_path, s_path = write_bench(spec, args.out)
        print(f"wrote {v_path} {s_path}")
    elif args.command == "serve":
        _serve(args, app)
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    args = parse_args(argv)
    log_path = setup_logging(level_name=args.log_level)
    logger.info("Starting deskpd command=%s log=%s", args.command, log_path)
    try:
        code = run(args)
    except StepFailed as exc:
        print(f"deskpd: step {exc.step} failed: {exc.cause}", file=sys.stderr)
        code = 1
    except DeskPdError as exc:
        step = getattr(exc, "step", "") or getattr(args, "name", "") or args.command
        print(f"deskpd: {step}: {exc}", file=sys.stderr)
        code = 2
    except OSError as exc:
        print(f"deskpd: {exc}", file=sys.stderr)
        code = 2
    sys.exit(code)


if __name__ == "__main__":
    main()
