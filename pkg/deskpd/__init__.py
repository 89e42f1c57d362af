"""Desk-scale physical design toolkit: one design database and a netlist-to-layout tool chain."""

from __future__ import annotations

__version__ = "0.1.0"

from .config import Settings, load_flow_config, load_settings
from .db import Design, TechLibrary, validate
from .errors import DeskPdError
from .flow import FlowApp, StepOutcome
from .models import FlowConfig, RunReport, StepReport

__all__ = [
    "Design",
    "DeskPdError",
    "FlowApp",
    "FlowConfig",
    "RunReport",
    "Settings",
    "StepOutcome",
    "StepReport",
    "TechLibrary",
    "load_flow_config",
    "load_settings",
    "validate",
    "__version__",
]
