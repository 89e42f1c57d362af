"""Vectorless power analysis: probability/toggle propagation and switching, internal, leakage.

Inputs are assumed independent (reconvergent fanout is not correlated) and the toggle
model is zero-delay, so glitches are not counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from .boolexpr import Expr, evaluate, parse_function, variables
from .db import Design, Instance, Net, NetPin
from .errors import CombinationalLoop
from .models import InstancePower, PowerConfig, PowerReport
from .parasitics import NetParasitics
from .sdc import SdcConstraints

logger = logging.getLogger(__name__)

CLOCK_PROBABILITY = 0.5
CLOCK_TOGGLE = 2.0
DAMPING = 0.5
MAX_ITERATIONS = 100
TOLERANCE = 1e-6

FJ_HZ_TO_UW = 1e-9
FF_HZ_TO_UW = 1e-9  # fF·V²·Hz -> µW


@dataclass
class ActivityState:
    """Static probability and toggle density (per clock cycle) per net name."""

    probability: Dict[str, float] = field(default_factory=dict)
    toggle: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    warnings: List[str] = field(default_factory=list)

    def of(self, net: str) -> Tuple[float, float]:
        return self.probability.get(net, 0.0), self.toggle.get(net, 0.0)


def output_activity(
    expr: Expr, inputs: Mapping[str, Tuple[float, float]]
) -> Tuple[float, float]:
    """(p, T) of ``expr`` from independent input (p, T) by minterm enumeration.

    p is the probability-weighted sum over true minterms; T is Σ P(∂f/∂x) · T(x).
    """
    names = list(variables(expr))
    k = len(names)
    weights: List[float] = []
    values: List[bool] = []
    for m in range(1 << k):
        assignment = {name: bool(m >> i & 1) for i, name in enumerate(names)}
        w = 1.0
        for i, name in enumerate(names):
            p = inputs.get(name, (0.0, 0.0))[0]
            w *= p if m >> i & 1 else 1.0 - p
        weights.append(w)
        values.append(evaluate(expr, assignment))
    probability = sum(w for w, v in zip(weights, values) if v)
    toggle = 0.0
    for i, name in enumerate(names):
        t_i = inputs.get(name, (0.0, 0.0))[1]
        if t_i == 0:
            continue
        sensitivity = 0.0
        for m in range(1 << k):
            if m >> i & 1 or values[m] == values[m | 1 << i]:
                continue
            w = 1.0
            for j, other in enumerate(names):
                if j == i:
                    continue
                p = inputs.get(other, (0.0, 0.0))[0]
                w *= p if m >> j & 1 else 1.0 - p
            sensitivity += w
        toggle += sensitivity * t_i
    return probability, toggle


def _clock_nets(design: Design, sdc: Optional[SdcConstraints]) -> set:
    found = {net.name for net in design.nets if net.is_clock}
    if sdc is not None:
        for clock in sdc.clocks:
            if clock.source and design.has_port(clock.source):
                port = design.port(clock.source)
                if port.net is not None:
                    found.add(design.nets[port.net].name)
    return found


def _pin_net(design: Design, inst: Instance, pin: str) -> Optional[Net]:
    return design.net_of(NetPin(inst.id, pin))


def _ff_inverted(expr: Optional[Expr]) -> bool:
    if expr is None:
        return False
    names = variables(expr)
    return not evaluate(expr, {n: not n.upper().endswith("N") for n in names})


class _Propagator:
    def __init__(self, design: Design, cfg: PowerConfig, sdc: Optional[SdcConstraints]):
        self.design = design
        self.cfg = cfg
        self.state = ActivityState()
        self.clocks = _clock_nets(design, sdc)
        self.combinational: List[Instance] = []
        self.sequential: List[Instance] = []
        for inst in design.instances:
            timing = inst.master.timing
            if timing is None:
                continue
            (self.sequential if timing.is_sequential else self.combinational).append(inst)
        self.order = self._levelize()
        self.next_state: Dict[int, Expr] = {
            inst.id: parse_function(inst.master.timing.ff.next_state) for inst in self.sequential
        }
        self._warned: set = set()

    def _levelize(self) -> List[Instance]:
        """Combinational instances in topological order of their net dependencies."""
        design = self.design
        graph = nx.DiGraph()
        for inst in self.combinational:
            graph.add_node(inst.id)
        for inst in self.combinational:
            for pin in inst.master.output_pins():
                net = _pin_net(design, inst, pin.name)
                if net is None:
                    continue
                for load in design.loads(net):
                    if load.instance is not None and graph.has_node(load.instance):
                        graph.add_edge(inst.id, load.instance)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            raise CombinationalLoop([design.instances[a].name for a, _ in cycle])
        return [design.instances[i] for i in nx.lexicographical_topological_sort(graph)]

    def warn(self, message: str) -> None:
        if message not in self._warned:
            self._warned.add(message)
            self.state.warnings.append(message)
            logger.warning(message)

    def set(self, net: Net, p: float, t: float) -> None:
        if net.name in self.clocks:
            p, t = CLOCK_PROBABILITY, CLOCK_TOGGLE
        self.state.probability[net.name] = p
        self.state.toggle[net.name] = t

    def inputs_of(self, inst: Instance, names: Sequence[str]) -> Dict[str, Tuple[float, float]]:
        values = {}
        for name in names:
            net = _pin_net(self.design, inst, name)
            values[name] = self.state.of(net.name) if net is not None else (0.0, 0.0)
        return values

    def seed(self) -> None:
        design = self.design
        cfg = self.cfg
        for net in design.nets:
            self.set(net, cfg.input_probability, cfg.input_toggle)

    def combinational_pass(self) -> None:
        for inst in self.order:
            timing = inst.master.timing
            inputs = [p.name for p in inst.master.input_pins()]
            for pin in inst.master.output_pins():
                net = _pin_net(self.design, inst, pin.name)
                if net is None:
                    continue
                expr = inst.master.function(pin.name)
                values = self.inputs_of(inst, inputs)
                if expr is None:
                    self.warn(f"NoFunction: {timing.name}/{pin.name}")
                    toggle = max((t for _, t in values.values()), default=0.0)
                    self.set(net, 0.5, toggle)
                    continue
                self.set(net, *output_activity(expr, values))

    def sequential_step(self) -> float:
        """Move FF outputs toward their D-input activity; returns the largest change."""
        change = 0.0
        for inst in self.sequential:
            expr = self.next_state[inst.id]
            d_p, d_t = output_activity(expr, self.inputs_of(inst, variables(expr)))
            for pin in inst.master.output_pins():
                net = _pin_net(self.design, inst, pin.name)
                if net is None or net.name in self.clocks:
                    continue
                target_p = 1.0 - d_p if _ff_inverted(inst.master.function(pin.name)) else d_p
                old_p, old_t = self.state.of(net.name)
                new_p = DAMPING * target_p + (1 - DAMPING) * old_p
                new_t = DAMPING * d_t + (1 - DAMPING) * old_t
                change = max(change, abs(new_p - old_p), abs(new_t - old_t))
                self.set(net, new_p, new_t)
        return change

    def run(self) -> ActivityState:
        self.seed()
        self.combinational_pass()
        for iteration in range(1, MAX_ITERATIONS + 1):
            self.state.iterations = iteration
            change = self.sequential_step()
            self.combinational_pass()
            if change < TOLERANCE:
                break
        return self.state


def propagate_activity(
    design: Design, cfg: PowerConfig = PowerConfig(), sdc: Optional[SdcConstraints] = None
) -> ActivityState:
    """Levelized probability/toggle propagation with a damped fixed point through flip-flops."""
    state = _Propagator(design, cfg, sdc).run()
    logger.info(
        "Activity propagated nets=%s iterations=%s warnings=%s",
        len(state.probability),
        state.iterations,
        len(state.warnings),
    )
    return state


# ---------------------------------------------------------------------------
# Power
# ---------------------------------------------------------------------------


def _slew_at(slews: Optional[Mapping[str, float]], name: str, default: float) -> float:
    if slews is None:
        return default
    return slews.get(name, default)


def compute_power(
    design: Design,
    parasitics: Mapping[str, NetParasitics],
    activity: ActivityState,
    clock_freq: float,
    cfg: PowerConfig = PowerConfig(),
    slews: Optional[Mapping[str, float]] = None,
    default_slew: float = 0.05,
) -> PowerReport:
    """Switching ½·T·C·V²·f on the driver, internal-energy lookups × T × f, and leakage (µW).

    ``clock_freq`` is in Hz; ``slews`` maps pin names to transition times (ns) for the
    internal-power lookups.
    """
    voltage = cfg.supply_voltage or design.tech.nominal_voltage
    rows: Dict[str, InstancePower] = {}
    warnings: List[str] = list(activity.warnings)

    def row(name: str) -> InstancePower:
        if name not in rows:
            rows[name] = InstancePower(instance=name)
        return rows[name]

    for net in design.nets:
        driver = design.driver(net)
        if driver is None:
            continue
        cap = parasitics[net.name].load_cap if net.name in parasitics else 0.0
        _, toggle = activity.of(net.name)
        owner = (
            design.instances[driver.instance].name
            if driver.instance is not None
            else driver.pin
        )
        row(owner).switching += 0.5 * toggle * cap * voltage**2 * clock_freq * FF_HZ_TO_UW
    for inst in design.instances:
        timing = inst.master.timing
        if timing is None:
            continue
        entry = row(inst.name)
        if timing.leakage is None:
            warnings.append(f"MissingLeakage: {timing.name}")
        else:
            entry.leakage = timing.leakage
        for pin_name, lpin in timing.pins.items():
            if not lpin.internal_power:
                continue
            net = _pin_net(design, inst, pin_name)
            if net is None:
                continue
            _, toggle = activity.of(net.name)
            if lpin.direction == "output":
                load = parasitics[net.name].load_cap if net.name in parasitics else 0.0
            else:
                load = 0.0
            energies = []
            for power in lpin.internal_power:
                related = power.related_pin or pin_name
                slew = _slew_at(slews, f"{inst.name}/{related}", default_slew)
                energies.append(power.energy(slew, load))
            energy = sum(energies) / len(energies)
            entry.internal += energy * toggle * clock_freq * FJ_HZ_TO_UW
    warnings = sorted(set(warnings))
    for message in warnings:
        if message.startswith("MissingLeakage"):
            logger.warning(message)
    instances = [rows[name] for name in sorted(rows)]
    report = PowerReport(
        instances=instances,
        switching=sum(r.switching for r in instances),
        internal=sum(r.internal for r in instances),
        leakage=sum(r.leakage for r in instances),
        frequency_mhz=clock_freq / 1e6,
        voltage=voltage,
        warnings=warnings,
    )
    report.total = report.switching + report.internal + report.leakage
    logger.info(
        "Power total=%.4fuW switching=%.4f internal=%.4f leakage=%.4f",
        report.total,
        report.switching,
        report.internal,
        report.leakage,
    )
    return report


def analyze_power(
    design: Design, graph, activity: ActivityState, cfg: PowerConfig = PowerConfig()
) -> PowerReport:
    """``compute_power`` driven by a propagated timing graph: its parasitics, slews and clock."""
    clocks = graph.sdc.clocks
    freq = clocks[0].frequency_hz if clocks else 0.0
    slews = {v.name: max(v.slew_late) for v in graph.vertices}
    return compute_power(
        design,
        graph.parasitics,
        activity,
        freq,
        cfg,
        slews=slews,
        default_slew=graph.config.default_input_slew_ns,
    )


def format_power_report(report: PowerReport) -> str:
    """Fixed-column text table, one row per instance, totals last (µW)."""
    lines = [
        f"voltage {report.voltage:.3f} V  frequency {report.frequency_mhz:.3f} MHz",
        f"{'instance':<24} {'switching':>12} {'internal':>12} {'leakage':>12} {'total':>12}",
    ]
    for r in report.instances:
        lines.append(
            f"{r.instance:<24} {r.switching:>12.6f} {r.internal:>12.6f} "
            f"{r.leakage:>12.6f} {r.total:>12.6f}"
        )
    lines.append(
        f"{'total':<24} {report.switching:>12.6f} {report.internal:>12.6f} "
        f"{report.leakage:>12.6f} {report.total:>12.6f}"
    )
    for message in report.warnings:
        lines.append(f"warning: {message}")
    return "\n".join(lines) + "\n"
