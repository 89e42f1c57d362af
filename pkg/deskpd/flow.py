"""Netlist-to-layout orchestration.

A run is a fold of ``run_step`` over checkpoint DEF text: every step re-reads the previous
checkpoint, so a scripted sequence of single steps and a monolithic run produce identical
artifacts.
"""

from __future__ import annotations

import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

from .config import Settings, check_inputs, load_flow_config
from .cts import report_skew, run_cts
from .db import Design, TechLibrary
from .def_io import parse_def, write_def
from .errors import DeskPdError, NoFillerMasters, PreconditionViolated, StepFailed
from .evaluate import density_map, total_hpwl
from .floorplan import gen_pdn, init_floorplan, load_preplacement, place_io_pins, place_macros
from .legalize import check_placement, detailed_place, insert_fillers, legalize
from .lef import parse_tech_lef
from .liberty import parse_liberty
from .models import STEP_ORDER, FlowConfig, RunReport, StaConfig, StepReport
from .netlist import NetlistAST, build_design, parse_netlist
from .place import global_place
from .power import analyze_power, format_power_report, propagate_activity
from .route import global_route, write_guides
from .sdc import SdcConstraints, parse_sdc
from .sta import build_timing_graph, format_timing_report, propagate, report_paths, timing_summary
from .svg import render_layout_svg
from .timing_opt import fix_drv, fix_hold, fix_setup

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
FLOAT_DIGITS = 9
SUMMARY_KEYS = (
    "hpwl",
    "density_max",
    "skew",
    "wns",
    "tns",
    "hold_wns",
    "overflow",
    "wirelength",
    "via_count",
    "power_total",
)


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, FLOAT_DIGITS) + 0.0
    if isinstance(value, dict):
        return {str(k): _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def dump_json(payload: Any) -> str:
    """Stable JSON text: sorted keys, floats rounded to a fixed number of digits."""
    return json.dumps(_rounded(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def checkpoint_stem(name: str) -> str:
    return f"{STEP_ORDER.index(name) + 1:02d}_{name}"


@dataclass
class FlowInputs:
    tech: TechLibrary
    netlist: NetlistAST
    sdc: SdcConstraints
    preplacement: Optional[str] = None


@dataclass
class StepOutcome:
    name: str
    design: Design
    checkpoint: str
    report: StepReport
    artifacts: Dict[str, str] = field(default_factory=dict)


def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_inputs(config: FlowConfig, threads: int = 1) -> FlowInputs:
    """Parse the technology, netlist and constraints; independent files parse in parallel."""
    check_inputs(config)
    inputs = config.inputs
    jobs: Dict[str, Tuple[Callable[..., Any], Path]] = {
        "lef": (parse_tech_lef, inputs.tech_lef),
        "lib": (parse_liberty, inputs.liberty),
        "netlist": (parse_netlist, inputs.netlist),
        "sdc": (parse_sdc, inputs.sdc),
    }

    def run(key: str) -> Any:
        parser, path = jobs[key]
        return parser(_read(path), source=str(path))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parsed = dict(zip(jobs, pool.map(run, jobs)))
    tech: TechLibrary = parsed["lef"]
    tech.attach_liberty(parsed["lib"])
    preplacement = _read(inputs.preplacement) if inputs.preplacement is not None else None
    loaded = FlowInputs(tech, parsed["netlist"], parsed["sdc"], preplacement)
    if config.clock_period_factor is not None:
        loaded.sdc = relax_clocks(loaded, config.clock_period_factor, config.sta)
    logger.info(
        "Loaded inputs layers=%s masters=%s instances=%s clocks=%s",
        len(tech.layers),
        len(tech.masters),
        len(parsed["netlist"].instances),
        len(parsed["sdc"].clocks),
    )
    return loaded


def relax_clocks(inputs: FlowInputs, factor: float, config: StaConfig) -> SdcConstraints:
    """Constraints whose clock periods are ``factor`` times the unplaced critical path."""
    design = build_design(inputs.tech, inputs.netlist)
    graph = propagate(build_timing_graph(design, inputs.sdc.resolve(design), config))
    worst: Dict[str, float] = {}
    for check in graph.checks.values():
        if check.constrained and check.vertex.reached:
            name = check.clock.name
            worst[name] = min(worst.get(name, math.inf), check.vertex.setup_slack())
    clocks = []
    for clock in inputs.sdc.clocks:
        needed = clock.period - worst.get(clock.name, clock.period)
        if needed <= 0:
            clocks.append(clock)
            continue
        period = factor * needed
        scale = period / clock.period
        logger.info("Clock %s period %.4f -> %.4f ns", clock.name, clock.period, period)
        clocks.append(
            clock.model_copy(
                update={"period": period, "waveform": tuple(w * scale for w in clock.waveform)}
            )
        )
    return inputs.sdc.model_copy(update={"clocks": clocks})


def _require_legal(design: Design, step: str) -> None:
    if check_placement(design):
        raise PreconditionViolated("legal placement", step)


# ---------------------------------------------------------------------------
# Steps: each mutates the design and returns (metrics, warnings, extra artifacts)
# ---------------------------------------------------------------------------

StepResult = Tuple[Dict[str, Any], List[str], Dict[str, str]]


def _step_floorplan(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    init_floorplan(design, config.floorplan)
    place_io_pins(design, config.floorplan.io_order)
    if inputs.preplacement is not None:
        load_preplacement(design, inputs.preplacement)
    place_macros(design)
    if config.pdn.enabled:
        gen_pdn(design, config.pdn)
    dbu2 = design.tech.dbu_per_micron**2
    cell_area = sum(inst.master.area for inst in design.instances)
    metrics = {
        "die_area_um2": design.die.area / dbu2,
        "core_area_um2": design.core.area / dbu2,
        "rows": len(design.rows),
        "ports": len(design.ports),
        "utilization": cell_area / design.core.area if design.core.area else 0.0,
        "pdn_wires": sum(len(s.wires) for s in design.special_nets),
        "clock_periods": {c.name: c.period for c in inputs.sdc.clocks},
    }
    return metrics, [], {}


def _step_place(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    placer = config.placer_config()
    global_place(design, placer)
    legal_hpwl = total_hpwl(legalize(design))
    detailed_place(design, placer)
    metrics = {
        "hpwl": total_hpwl(design),
        "legalized_hpwl": legal_hpwl,
        "density_max": density_map(design).max,
        "placement_violations": len(check_placement(design)),
    }
    return metrics, [], {}


def _step_cts(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    _require_legal(design, "cts")
    sdc = inputs.sdc.resolve(design)
    clocks = {}
    for tree in run_cts(design, sdc, config.cts):
        clocks[tree.clock] = report_skew(tree).model_dump(mode="json")
    metrics = {
        "clocks": clocks,
        "skew": max((c["max_skew"] for c in clocks.values()), default=0.0),
        "clock_buffers": sum(c["buffer_count"] for c in clocks.values()),
        "placement_violations": len(check_placement(design)),
    }
    return metrics, [], {}


def _step_opt(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    _require_legal(design, "opt")
    graph = propagate(build_timing_graph(design, inputs.sdc.resolve(design), config.sta))
    fixes = [fix(design, graph, config.opt) for fix in (fix_drv, fix_setup, fix_hold)]
    summary = timing_summary(graph)
    warnings = [note for fix in fixes for note in fix.notes]
    metrics = {
        "fixes": {fix.kind: fix.model_dump(mode="json") for fix in fixes},
        "wns": summary.wns,
        "tns": summary.tns,
        "hold_wns": summary.hold_wns,
        "hold_tns": summary.hold_tns,
        "placement_violations": len(check_placement(design)),
    }
    return metrics, warnings, {}


def _step_route(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    _require_legal(design, "route")
    warnings: List[str] = []
    try:
        insert_fillers(design)
    except NoFillerMasters as exc:
        warnings.append(str(exc))
        logger.warning("Skipping fillers: %s", exc)
    result = global_route(design, config.router)
    if result.layer_overflow:
        warnings.append(f"LayerOverflow {result.layer_overflow}")
    if result.tracks.overflow:
        warnings.append(f"TrackOverflow {result.tracks.overflow}")
    metrics = {
        "nets": len(result.routes),
        "rounds": result.rounds,
        "overflow": result.grid.total_overflow(),
        "layer_overflow": result.layer_overflow,
        "track_overflow": result.tracks.overflow,
        "wirelength": result.wirelength,
        "topology_length": result.topology_length,
        "via_count": result.via_count,
    }
    return metrics, warnings, {"route.guide": write_guides(result.guides)}


def _step_sta(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    graph = propagate(build_timing_graph(design, inputs.sdc.resolve(design), config.sta))
    summary = timing_summary(graph)
    paths = report_paths(graph, config.sta.path_count)
    warnings = (
        [f"UnconstrainedEndpoints {len(summary.unconstrained)}"] if summary.unconstrained else []
    )
    metrics = {
        "mode": graph.mode,
        "wns": summary.wns,
        "tns": summary.tns,
        "hold_wns": summary.hold_wns,
        "hold_tns": summary.hold_tns,
        "endpoints": summary.endpoints,
        "unconstrained": len(summary.unconstrained),
    }
    return metrics, warnings, {"timing.rpt": format_timing_report(paths, summary)}


def _step_power(design: Design, config: FlowConfig, inputs: FlowInputs) -> StepResult:
    sdc = inputs.sdc.resolve(design)
    graph = propagate(build_timing_graph(design, sdc, config.sta))
    activity = propagate_activity(design, config.power, sdc)
    report = analyze_power(design, graph, activity, config.power)
    metrics = {
        "switching": report.switching,
        "internal": report.internal,
        "leakage": report.leakage,
        "power_total": report.total,
        "frequency_mhz": report.frequency_mhz,
        "voltage": report.voltage,
        "activity_iterations": activity.iterations,
    }
    return metrics, list(report.warnings), {"power.rpt": format_power_report(report)}


STEPS: Dict[str, Callable[[Design, FlowConfig, FlowInputs], StepResult]] = {
    "floorplan": _step_floorplan,
    "place": _step_place,
    "cts": _step_cts,
    "opt": _step_opt,
    "route": _step_route,
    "sta": _step_sta,
    "power": _step_power,
}


def _summary(steps: List[StepReport]) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"completed": [s.name for s in steps]}
    for step in steps:
        for key in SUMMARY_KEYS:
            if key in step.metrics:
                summary[key] = step.metrics[key]
    return summary


def format_run_report(report: RunReport) -> str:
    """Plain-text digest of a run report."""
    lines = [f"design {report.design}"]
    for step in report.steps:
        scalars = " ".join(
            f"{k}={_rounded(v)}"
            for k, v in sorted(step.metrics.items())
            if isinstance(v, (int, float))
        )
        lines.append(f"  {step.name:<10} {step.wall_time_s:8.2f}s  {scalars}")
        lines.extend(f"    warning: {w}" for w in step.warnings)
    failed = report.summary.get("failed")
    if failed:
        lines.append(f"failed at {failed}: {report.summary.get('error', '')}")
    return "\n".join(lines) + "\n"


class FlowApp:
    """Owns the loaded inputs and runs steps against checkpoints."""

    def __init__(self, settings: Settings, config: Optional[FlowConfig] = None):
        self.settings = settings
        self._config = config
        self._inputs: Optional[FlowInputs] = None
        self._startup_lock = asyncio.Lock()
        self._started = False

    async def start(self) -> None:
        async with self._startup_lock:
            if self._started:
                return
            self._started = True

    async def stop(self) -> None:
        async with self._startup_lock:
            if not self._started:
                return
            self._inputs = None
            self._started = False

    @property
    def config(self) -> FlowConfig:
        if self._config is None:
            self._config = load_flow_config(self.settings.config_file, self.settings.output_dir)
        return self._config

    def use_config(self, path: Path) -> FlowConfig:
        """Switch to another config file; inputs are reloaded on next use."""
        self._config = load_flow_config(Path(path), self.settings.output_dir)
        self._inputs = None
        return self._config

    @property
    def inputs(self) -> FlowInputs:
        if self._inputs is None:
            self._inputs = load_inputs(self.config, self.settings.threads)
        return self._inputs

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)

    def initial_design(self) -> Design:
        return build_design(self.inputs.tech, self.inputs.netlist)

    def read_checkpoint(self, text: str, source: str = "") -> Design:
        return parse_def(text, self.inputs.tech, source=source)

    # -- execution -----------------------------------------------------------

    def run_step(self, name: str, checkpoint: Optional[str] = None) -> StepOutcome:
        """Run one step on a checkpoint (DEF text); ``floorplan`` may start from the netlist."""
        if name not in STEPS:
            raise PreconditionViolated(f"known step name (one of {', '.join(STEP_ORDER)})", name)
        if checkpoint is None:
            if name != "floorplan":
                previous = STEP_ORDER[STEP_ORDER.index(name) - 1]
                raise PreconditionViolated(f"checkpoint from step {previous}", name)
            design = self.initial_design()
        else:
            design = self.read_checkpoint(checkpoint, source=f"{name} input")
        warnings_before = len(design.warnings)
        started = time.perf_counter()
        metrics, warnings, artifacts = STEPS[name](design, self.config, self.inputs)
        elapsed = time.perf_counter() - started
        warnings = design.warnings[warnings_before:] + warnings
        text = write_def(design)
        report = StepReport(
            name=name,
            checkpoint=f"{checkpoint_stem(name)}.def",
            metrics=metrics,
            warnings=warnings,
            wall_time_s=elapsed,
        )
        logger.info("step=%s time=%.2fs metrics=%s", name, elapsed, json.dumps(_rounded(metrics)))
        return StepOutcome(name, design, text, report, artifacts)

    def write_step(self, outcome: StepOutcome) -> Path:
        """Write the checkpoint DEF, its metrics JSON, extras and the optional SVG."""
        out = self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        stem = checkpoint_stem(outcome.name)
        def_path = out / f"{stem}.def"
        def_path.write_text(outcome.checkpoint, encoding="utf-8")
        metrics = outcome.report.model_dump(mode="json", exclude={"wall_time_s"})
        (out / f"{stem}.json").write_text(dump_json(metrics), encoding="utf-8")
        for filename, text in outcome.artifacts.items():
            (out / filename).write_text(text, encoding="utf-8")
        if self.config.svg:
            (out / f"{stem}.svg").write_text(render_layout_svg(outcome.design), encoding="utf-8")
        return def_path

    def write_report(self, report: RunReport) -> Path:
        path = self.output_dir / REPORT_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_json(report.model_dump(mode="json")), encoding="utf-8")
        return path

    def run_flow(self) -> RunReport:
        """Execute the configured steps in order, writing artifacts after each."""
        config = self.config
        design_name = self.inputs.netlist.module
        report = RunReport(design=design_name)
        checkpoint: Optional[str] = None
        for name in config.steps:
            try:
                outcome = self.run_step(name, checkpoint)
            except DeskPdError as exc:
                report.summary = _summary(report.steps)
                report.summary.update(failed=name, error=str(exc))
                self.write_report(report)
                logger.error("step=%s failed: %s", name, exc)
                raise StepFailed(name, exc) from exc
            self.write_step(outcome)
            report.steps.append(outcome.report)
            checkpoint = outcome.checkpoint
        report.summary = _summary(report.steps)
        self.write_report(report)
        logger.info("Flow finished design=%s steps=%s", design_name, len(report.steps))
        return report

    def load_report(self, directory: Optional[Path] = None) -> RunReport:
        path = Path(directory or self.output_dir) / REPORT_FILE
        return RunReport.model_validate_json(path.read_text(encoding="utf-8"))

    def render(self, def_path: Path) -> str:
        return render_layout_svg(self.read_checkpoint(_read(def_path), source=str(def_path)))

    # -- async wrappers for the MCP server -------------------------------------

    async def run_flow_async(self) -> RunReport:
        return await asyncio.to_thread(self.run_flow)

    async def run_step_async(
        self, name: str, checkpoint_path: Optional[Path]
    ) -> Tuple[StepOutcome, Path]:
        def work() -> Tuple[StepOutcome, Path]:
            text = _read(checkpoint_path) if checkpoint_path is not None else None
            outcome = self.run_step(name, text)
            return outcome, self.write_step(outcome)

        return await asyncio.to_thread(work)

    async def render_async(self, def_path: Path) -> str:
        return await asyncio.to_thread(self.render, def_path)
