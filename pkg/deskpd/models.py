"""Typed configuration and report models."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

STEP_ORDER = ["floorplan", "place", "cts", "opt", "route", "sta", "power"]


class FloorplanSpec(BaseModel):
    utilization: float = Field(0.6, gt=0, lt=1, description="Target core utilization")
    aspect_ratio: float = Field(1.0, gt=0, description="Core height / width")
    margin_um: float = Field(10.0, ge=0, description="Core-to-die margin per side")
    io_order: Optional[List[str]] = Field(None, description="Explicit clockwise port order")


class PdnSpec(BaseModel):
    enabled: bool = True
    rail_layer: str = "metal1"
    rail_width_um: float = Field(0.24, gt=0)
    vertical_layer: str = "metal4"
    horizontal_layer: str = "metal5"
    stripe_width_um: float = Field(1.6, gt=0)
    stripe_pitch_um: float = Field(40.0, gt=0)


class PlacerConfig(BaseModel):
    target_density: float = Field(0.8, gt=0, le=1)
    max_iterations: int = Field(300, gt=0, description="Conjugate-gradient iteration cap")
    cg_tolerance: float = Field(1e-6, gt=0)
    spread_iterations: int = Field(40, ge=0)
    detailed_passes: int = Field(8, ge=0)
    seed: int = 42
    bin_rows: int = Field(4, gt=0, description="Density bin edge in row heights")


class CtsConfig(BaseModel):
    buffer: str = "BUFX4"
    max_fanout: int = Field(16, gt=1)
    max_cap_ff: float = Field(150.0, gt=0)
    max_slew_ns: float = Field(0.5, gt=0)
    criterion: Literal["skew", "wirelength"] = "skew"
    search_radius: int = Field(50, gt=0)


class OptConfig(BaseModel):
    buffer: str = "BUFX2"
    hold_buffer: str = "BUFX1"
    max_iterations: int = Field(10, gt=0)
    hold_margin_ns: float = 0.0
    setup_effort: int = Field(50, gt=0)
    search_radius: int = Field(50, gt=0)


class RouterConfig(BaseModel):
    gcell_tracks: int = Field(15, gt=0)
    max_rounds: int = Field(20, gt=0)
    min_layer: str = "metal2"
    max_layer: Optional[str] = None
    overflow_penalty: float = Field(1.0, gt=0)
    penalty_growth: float = Field(2.0, ge=1)
    history_increment: float = Field(1.0, ge=0)
    via_cost: float = Field(1.0, ge=0)


class StaConfig(BaseModel):
    path_count: int = Field(10, gt=0)
    default_input_slew_ns: float = Field(0.05, ge=0)


class PowerConfig(BaseModel):
    supply_voltage: Optional[float] = Field(
        None, gt=0, description="Defaults to liberty nom_voltage"
    )
    input_probability: float = Field(0.5, ge=0, le=1)
    input_toggle: float = Field(0.2, ge=0)


class InputFiles(BaseModel):
    tech_lef: Path
    liberty: Path
    netlist: Path
    sdc: Path
    preplacement: Optional[Path] = None


class FlowConfig(BaseModel):
    inputs: InputFiles
    output_dir: Path = Path("out")
    steps: List[str] = Field(default_factory=lambda: list(STEP_ORDER))
    seed: Optional[int] = Field(None, description="Overrides placer.seed when set")
    clock_period_factor: Optional[float] = Field(
        None, gt=0, description="Rescale every clock to this multiple of the unplaced critical path"
    )
    svg: bool = True
    floorplan: FloorplanSpec = Field(default_factory=FloorplanSpec)
    pdn: PdnSpec = Field(default_factory=PdnSpec)
    placer: PlacerConfig = Field(default_factory=PlacerConfig)
    cts: CtsConfig = Field(default_factory=CtsConfig)
    opt: OptConfig = Field(default_factory=OptConfig)
    router: RouterConfig = Field(default_factory=RouterConfig)
    sta: StaConfig = Field(default_factory=StaConfig)
    power: PowerConfig = Field(default_factory=PowerConfig)

    @field_validator("steps")
    @classmethod
    def _steps_are_prefix(cls, steps: List[str]) -> List[str]:
        if steps != STEP_ORDER[: len(steps)]:
            raise ValueError(f"steps must be a prefix of {STEP_ORDER}, got {steps}")
        return steps

    def placer_config(self) -> PlacerConfig:
        if self.seed is None:
            return self.placer
        return self.placer.model_copy(update={"seed": self.seed})


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


class StageRow(BaseModel):
    pin: str
    transition: Literal["rise", "fall"]
    delay: float
    slew: float
    arrival: float


class PathEnd(BaseModel):
    endpoint: str
    startpoint: str
    mode: Literal["setup", "hold"]
    launch_edge: float
    capture_edge: float
    arrival: float
    required: float
    slack: float
    stages: List[StageRow] = Field(default_factory=list)


class TimingSummary(BaseModel):
    wns: float
    tns: float
    hold_wns: float
    hold_tns: float
    endpoints: int
    unconstrained: List[str] = Field(default_factory=list)
    endpoint_slack: Dict[str, float] = Field(default_factory=dict)


class SkewReport(BaseModel):
    clock: str
    max_skew: float
    mean_insertion: float
    insertion_delays: Dict[str, float]
    buffer_count: int
    wirelength: int
    snaking: int = 0


class FixReport(BaseModel):
    kind: Literal["drv", "setup", "hold"]
    moves: int = 0
    buffers_inserted: int = 0
    resized: int = 0
    reverted: int = 0
    before: float = 0.0
    after: float = 0.0
    trajectory: List[float] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class InstancePower(BaseModel):
    instance: str
    switching: float = 0.0
    internal: float = 0.0
    leakage: float = 0.0

    @property
    def total(self) -> float:
        return self.switching + self.internal + self.leakage


class PowerReport(BaseModel):
    instances: List[InstancePower] = Field(default_factory=list)
    switching: float = 0.0
    internal: float = 0.0
    leakage: float = 0.0
    total: float = 0.0
    frequency_mhz: float = 0.0
    voltage: float = 1.0
    warnings: List[str] = Field(default_factory=list)


class StepReport(BaseModel):
    name: str
    checkpoint: str
    metrics: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    wall_time_s: float = 0.0


class RunReport(BaseModel):
    design: str
    steps: List[StepReport] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
