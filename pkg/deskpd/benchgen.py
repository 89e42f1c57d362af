"""Synthetic gate-level benchmarks for the bundled toy library.

Logic is a random DAG built gate by gate: every new gate consumes the oldest still-unloaded
signal plus random recent ones, so cones stay local and no net is left dangling. Flip-flop D pins
and primary outputs absorb the last signals; leftovers fold into an XOR tree on ``parity``.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# master -> (input pins, output pin)
GATES: Dict[str, Tuple[Tuple[str, ...], str]] = {
    "INVX1": (("A",), "Y"),
    "BUFX1": (("A",), "Y"),
    "NAND2X1": (("A", "B"), "Y"),
    "NOR2X1": (("A", "B"), "Y"),
    "AND2X1": (("A", "B"), "Y"),
    "OR2X1": (("A", "B"), "Y"),
    "XOR2X1": (("A", "B"), "Y"),
    "AOI21X1": (("A", "B", "C"), "Y"),
    "MUX2X1": (("A", "B", "S"), "Y"),
}
WEIGHTS = {
    "INVX1": 3,
    "BUFX1": 1,
    "NAND2X1": 4,
    "NOR2X1": 3,
    "AND2X1": 2,
    "OR2X1": 2,
    "XOR2X1": 1,
    "AOI21X1": 2,
    "MUX2X1": 1,
}
WINDOW = 64


@dataclass(frozen=True)
class BenchSpec:
    name: str
    flip_flops: int
    gates: int
    inputs: int
    outputs: int
    period_ns: float = 4.0
    seed: int = 1


PRESETS = {
    "bench50": BenchSpec("bench50", flip_flops=50, gates=50, inputs=8, outputs=8, period_ns=2.0),
    "bench300": BenchSpec(
        "bench300", flip_flops=40, gates=300, inputs=16, outputs=16, period_ns=3.0
    ),
    "bench1k": BenchSpec(
        "bench1k", flip_flops=100, gates=1000, inputs=32, outputs=32, period_ns=4.0
    ),
}


@dataclass
class _Cell:
    master: str
    name: str
    pins: Dict[str, str]


class _Generator:
    def __init__(self, spec: BenchSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.pool: List[str] = []
        self.unused: Dict[str, None] = {}
        self.cells: List[_Cell] = []
        self.wires: List[str] = []
        self.masters = sorted(GATES)
        weights = np.array([WEIGHTS[m] for m in self.masters], dtype=float)
        self.probabilities = weights / weights.sum()

    def add_signal(self, name: str) -> None:
        self.pool.append(name)
        self.unused[name] = None

    def take(self, count: int) -> List[str]:
        """Oldest unloaded signal first, then distinct random picks from the recent window."""
        chosen: List[str] = []
        if self.unused:
            oldest = next(iter(self.unused))
            chosen.append(oldest)
        window = self.pool[-WINDOW:]
        while len(chosen) < count:
            candidate = window[int(self.rng.integers(len(window)))]
            if candidate not in chosen or len(set(window)) <= len(chosen):
                chosen.append(candidate)
        for name in chosen:
            self.unused.pop(name, None)
        return chosen

    def build(self) -> None:
        spec = self.spec
        for i in range(spec.inputs):
            self.add_signal(f"in{i}")
        for i in range(spec.flip_flops):
            self.add_signal(f"q{i}")
            self.wires.append(f"q{i}")
        for g in range(spec.gates):
            master = self.masters[int(self.rng.choice(len(self.masters), p=self.probabilities))]
            ins, out = GATES[master]
            sources = self.take(len(ins))
            net = f"n{g}"
            self.wires.append(net)
            self.cells.append(_Cell(master, f"g{g}", {**dict(zip(ins, sources)), out: net}))
            self.add_signal(net)
        flops = []
        for i in range(spec.flip_flops):
            (d,) = self.take(1)
            flops.append(_Cell("DFFX1", f"ff{i}", {"D": d, "CK": "clk", "Q": f"q{i}"}))
        for j in range(spec.outputs):
            (src,) = self.take(1)
            self.cells.append(_Cell("BUFX1", f"ob{j}", {"A": src, "Y": f"out{j}"}))
        self.cells = flops + self.cells
        self.fold_leftovers()

    def fold_leftovers(self) -> None:
        level = list(self.unused)
        self.unused.clear()
        k = 0
        while len(level) > 1:
            nxt = []
            for a, b in zip(level[0::2], level[1::2]):
                net = f"px{k}"
                self.wires.append(net)
                self.cells.append(_Cell("XOR2X1", f"px{k}", {"A": a, "B": b, "Y": net}))
                nxt.append(net)
                k += 1
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        self.parity = level[0] if level else None
        if self.parity is not None:
            self.cells.append(_Cell("BUFX1", "obp", {"A": self.parity, "Y": "parity"}))

    def ports(self) -> Tuple[List[str], List[str]]:
        inputs = ["clk"] + [f"in{i}" for i in range(self.spec.inputs)]
        outputs = [f"out{j}" for j in range(self.spec.outputs)]
        if self.parity is not None:
            outputs.append("parity")
        return inputs, outputs


def _wrapped(keyword: str, names: List[str], per_line: int = 12) -> List[str]:
    lines = []
    for i in range(0, len(names), per_line):
        lines.append(f"  {keyword} {', '.join(names[i:i + per_line])};")
    return lines


def generate_bench(spec: BenchSpec) -> Tuple[str, str]:
    """Verilog and SDC text for ``spec``; identical specs give identical text."""
    gen = _Generator(spec)
    gen.build()
    inputs, outputs = gen.ports()
    lines = [
        f"// {spec.name}: {spec.flip_flops} flip-flops, {spec.gates} gates, seed {spec.seed}",
        f"module {spec.name} ({', '.join(inputs + outputs)});",
    ]
    lines += _wrapped("input", inputs)
    lines += _wrapped("output", outputs)
    lines += _wrapped("wire", gen.wires)
    for cell in gen.cells:
        conns = ", ".join(f".{pin}({net})" for pin, net in cell.pins.items())
        lines.append(f"  {cell.master} {cell.name} ({conns});")
    lines.append("endmodule")
    verilog = "\n".join(lines) + "\n"

    sdc = "\n".join(
        [
            f"# {spec.name} constraints",
            f"create_clock -name clk -period {spec.period_ns:g} [get_ports clk]",
            "set_input_delay 0.2 -clock clk [all_inputs]",
            "set_output_delay 0.2 -clock clk [all_outputs]",
            "set_input_transition 0.05 [all_inputs]",
            "set_load 5 [all_outputs]",
            "set_max_transition 0.5 [current_design]",
        ]
    ) + "\n"
    logger.info(
        "Generated bench=%s cells=%s nets=%s",
        spec.name,
        len(gen.cells),
        len(gen.wires) + len(inputs),
    )
    return verilog, sdc


def write_bench(spec: BenchSpec, directory: Path) -> Tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    verilog, sdc = generate_bench(spec)
    v_path = directory / f"{spec.name}.v"
    s_path = directory / f"{spec.name}.sdc"
    v_path.write_text(verilog, encoding="utf-8")
    s_path.write_text(sdc, encoding="utf-8")
    return v_path, s_path
