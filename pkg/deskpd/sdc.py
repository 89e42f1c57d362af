"""SDC subset reader.

Values are read in the library's units (ns, fF). Object references may stay as patterns until
``SdcConstraints.resolve`` binds them against a design.
"""

from __future__ import annotations

import fnmatch
import logging
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError

from .db import Design, PinDirection
from .errors import ParseError, UnknownPin, UnsupportedCommand
from .lexer import Token, tokenize

logger = logging.getLogger(__name__)

ALL_INPUTS = "@all_inputs"
ALL_OUTPUTS = "@all_outputs"
CURRENT_DESIGN = "@design"


class ClockDef(BaseModel):
    name: str
    period: float = Field(gt=0)
    source: Optional[str] = None
    waveform: Tuple[float, float] = (0.0, 0.0)
    setup_uncertainty: float = 0.0
    hold_uncertainty: float = 0.0

    @property
    def frequency_hz(self) -> float:
        return 1e9 / self.period


class IoDelay(BaseModel):
    clock: Optional[str] = None
    max: float = 0.0
    min: float = 0.0


class SdcConstraints(BaseModel):
    clocks: List[ClockDef] = Field(default_factory=list)
    input_delays: Dict[str, IoDelay] = Field(default_factory=dict)
    output_delays: Dict[str, IoDelay] = Field(default_factory=dict)
    loads: Dict[str, float] = Field(default_factory=dict)
    input_transitions: Dict[str, float] = Field(default_factory=dict)
    max_transition: Optional[float] = None
    max_capacitance: Optional[float] = None

    def clock(self, name: str) -> Optional[ClockDef]:
        return next((c for c in self.clocks if c.name == name), None)

    def clock_sources(self) -> Dict[str, ClockDef]:
        return {c.source: c for c in self.clocks if c.source is not None}

    def resolve(self, design: Design) -> "SdcConstraints":
        """Expand patterns to concrete port names; unknown objects raise UnknownPin."""
        sources = set(self.clock_sources())
        inputs = [p.name for p in design.ports if p.direction == PinDirection.INPUT]
        outputs = [p.name for p in design.ports if p.direction == PinDirection.OUTPUT]
        every = [p.name for p in design.ports]

        def expand(key: str) -> List[str]:
            if key == ALL_INPUTS:
                return [name for name in inputs if name not in sources]
            if key == ALL_OUTPUTS:
                return outputs
            if any(ch in key for ch in "*?"):
                return [name for name in every if fnmatch.fnmatchcase(name, key)]
            if not design.has_port(key):
                raise UnknownPin(key, "SDC port")
            return [key]

        def remap(table: dict) -> dict:
            result = {}
            for key, value in table.items():
                for name in expand(key):
                    result[name] = value
            return result

        for clock in self.clocks:
            if clock.source is None:
                continue
            if "/" in clock.source:
                inst_name, pin = clock.source.rsplit("/", 1)
                if (
                    not design.has_instance(inst_name)
                    or pin not in design.instance(inst_name).master.pins
                ):
                    raise UnknownPin(clock.source, "clock source")
            elif not design.has_port(clock.source):
                raise UnknownPin(clock.source, "clock source")
        return self.model_copy(
            update={
                "input_delays": remap(self.input_delays),
                "output_delays": remap(self.output_delays),
                "loads": remap(self.loads),
                "input_transitions": remap(self.input_transitions),
            }
        )


Arg = Union[str, List[str]]


def _logical_lines(text: str) -> List[Tuple[int, str]]:
    commands: List[Tuple[int, str]] = []
    pending = ""
    start = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        if not pending:
            start = number
        stripped = raw.rstrip()
        if stripped.endswith("\\"):
            pending += stripped[:-1] + " "
            continue
        pending += stripped
        if pending.strip():
            commands.append((start, pending))
        pending = ""
    if pending.strip():
        commands.append((start, pending))
    return commands


class _SdcReader:
    def __init__(self, source: str):
        self.source = source
        self.sdc = SdcConstraints()
        self.line = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.source)

    def parse_args(
        self, tokens: List[Token], pos: int, closer: Optional[str]
    ) -> Tuple[List[Arg], int]:
        args: List[Arg] = []
        while pos < len(tokens):
            tok = tokens[pos]
            if closer is not None and tok.text == closer and not tok.quoted:
                return args, pos + 1
            if tok.text == "[" and not tok.quoted:
                inner, pos = self.parse_args(tokens, pos + 1, "]")
                args.append(self.query(inner))
                continue
            if tok.text == "{" and not tok.quoted:
                inner, pos = self.parse_args(tokens, pos + 1, "}")
                args.append([x for x in inner if isinstance(x, str)])
                continue
            args.append(tok.text)
            pos += 1
        if closer is not None:
            raise self.error(f"missing '{closer}'")
        return args, pos

    def query(self, inner: List[Arg]) -> List[str]:
        if not inner:
            raise self.error("empty command substitution")
        name, rest = inner[0], inner[1:]
        names: List[str] = []
        for item in rest:
            if isinstance(item, list):
                names.extend(item)
            elif not item.startswith("-"):
                names.append(item)
        if name in ("get_ports", "get_pins", "get_clocks", "get_nets"):
            return names
        if name == "all_inputs":
            return [ALL_INPUTS]
        if name == "all_outputs":
            return [ALL_OUTPUTS]
        if name == "current_design":
            return [CURRENT_DESIGN]
        raise UnsupportedCommand(str(name), self.line)

    def number(self, raw: Arg) -> float:
        try:
            return float(raw)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            raise self.error(f"expected number, got {raw!r}") from None

    def split(self, args: List[Arg], flags_with_value: Tuple[str, ...]) -> Tuple[dict, List[Arg]]:
        opts: dict = {}
        positional: List[Arg] = []
        idx = 0
        while idx < len(args):
            arg = args[idx]
            if isinstance(arg, str) and arg.startswith("-") and not _is_number(arg):
                if arg in flags_with_value:
                    if idx + 1 >= len(args):
                        raise self.error(f"option {arg} needs a value")
                    opts[arg] = args[idx + 1]
                    idx += 2
                    continue
                opts[arg] = True
            else:
                positional.append(arg)
            idx += 1
        return opts, positional

    @staticmethod
    def targets(items: List[Arg]) -> List[str]:
        names: List[str] = []
        for item in items:
            names.extend(item if isinstance(item, list) else [item])
        return names

    def run(self, text: str) -> SdcConstraints:
        for line, command in _logical_lines(text):
            self.line = line
            tokens = tokenize(command, punctuation="[]{};", source=self.source)
            # split on ';' separators
            chunk: List[Token] = []
            for tok in tokens + [Token(";", line)]:
                if tok.text == ";" and not tok.quoted:
                    if chunk:
                        args, _ = self.parse_args(chunk, 0, None)
                        self.dispatch(args)
                    chunk = []
                else:
                    chunk.append(tok)
        logger.info(
            "Parsed SDC clocks=%s input_delays=%s output_delays=%s loads=%s",
            len(self.sdc.clocks),
            len(self.sdc.input_delays),
            len(self.sdc.output_delays),
            len(self.sdc.loads),
        )
        return self.sdc

    def dispatch(self, args: List[Arg]) -> None:
        name = args[0]
        if not isinstance(name, str):
            raise self.error("command name expected")
        rest = args[1:]
        handler = getattr(self, f"cmd_{name}", None)
        if handler is None:
            raise UnsupportedCommand(name, self.line)
        try:
            handler(rest)
        except ValidationError as exc:
            raise self.error(f"{name}: {exc.errors()[0]['msg']}") from exc

    def cmd_current_design(self, rest: List[Arg]) -> None:
        return None

    def cmd_create_clock(self, rest: List[Arg]) -> None:
        opts, positional = self.split(rest, ("-period", "-name", "-waveform"))
        if "-period" not in opts:
            raise self.error("create_clock needs -period")
        period = self.number(opts["-period"])
        sources = self.targets(positional)
        name = opts.get("-name") or (sources[0] if sources else None)
        if not name:
            raise self.error("create_clock needs -name or a source")
        waveform = opts.get("-waveform")
        if isinstance(waveform, list) and len(waveform) == 2:
            wave = (self.number(waveform[0]), self.number(waveform[1]))
        else:
            wave = (0.0, period / 2)
        self.sdc.clocks.append(
            ClockDef(
                name=str(name),
                period=period,
                source=sources[0] if sources else None,
                waveform=wave,
            )
        )

    def _io_delay(self, rest: List[Arg], table: Dict[str, IoDelay]) -> None:
        opts, positional = self.split(rest, ("-clock",))
        if not positional:
            raise self.error("delay value missing")
        value = self.number(positional[0])
        clock = opts.get("-clock")
        if isinstance(clock, list):
            clock = clock[0] if clock else None
        for port in self.targets(positional[1:]):
            entry = table.get(port) or IoDelay(clock=clock, max=value, min=value)
            entry = entry.model_copy(update={"clock": clock or entry.clock})
            if "-max" in opts or "-min" not in opts:
                entry = entry.model_copy(update={"max": value})
            if "-min" in opts or "-max" not in opts:
                entry = entry.model_copy(update={"min": value})
            table[port] = entry

    def cmd_set_input_delay(self, rest: List[Arg]) -> None:
        self._io_delay(rest, self.sdc.input_delays)

    def cmd_set_output_delay(self, rest: List[Arg]) -> None:
        self._io_delay(rest, self.sdc.output_delays)

    def cmd_set_load(self, rest: List[Arg]) -> None:
        _, positional = self.split(rest, ())
        value = self.number(positional[0])
        for port in self.targets(positional[1:]):
            self.sdc.loads[port] = value

    def cmd_set_input_transition(self, rest: List[Arg]) -> None:
        _, positional = self.split(rest, ())
        value = self.number(positional[0])
        for port in self.targets(positional[1:]):
            self.sdc.input_transitions[port] = value

    def cmd_set_max_transition(self, rest: List[Arg]) -> None:
        _, positional = self.split(rest, ())
        self.sdc.max_transition = self.number(positional[0])

    def cmd_set_max_capacitance(self, rest: List[Arg]) -> None:
        _, positional = self.split(rest, ())
        self.sdc.max_capacitance = self.number(positional[0])

    def cmd_set_clock_uncertainty(self, rest: List[Arg]) -> None:
        opts, positional = self.split(rest, ())
        value = self.number(positional[0])
        names = self.targets(positional[1:]) or [c.name for c in self.sdc.clocks]
        for idx, clock in enumerate(self.sdc.clocks):
            if clock.name not in names:
                continue
            update = {}
            if "-setup" in opts or "-hold" not in opts:
                update["setup_uncertainty"] = value
            if "-hold" in opts or "-setup" not in opts:
                update["hold_uncertainty"] = value
            self.sdc.clocks[idx] = clock.model_copy(update=update)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_sdc(text: str, source: str = "") -> SdcConstraints:
    return _SdcReader(source).run(text)
