"""Exception types raised by the toolkit."""

from __future__ import annotations

from typing import Any, Optional


class DeskPdError(Exception):
    """Base class for every toolkit error."""


class ParseError(DeskPdError, ValueError):
    """Malformed input text; carries the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        prefix = f"{where}{line}: " if line is not None else (f"{source}: " if source else "")
        super().__init__(f"{prefix}{message}")


class MissingTable(ParseError):
    pass


class UndeclaredWire(ParseError):
    pass


class PositionalConnectionUnsupported(ParseError):
    pass


class UnsupportedCommand(ParseError):
    def __init__(self, command: str, line: Optional[int] = None):
        self.command = command
        super().__init__(f"unsupported command {command}", line)


class LookupFailure(DeskPdError, ValueError):
    """An identifier could not be resolved; ``name`` holds it."""

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        message = f"{type(self).__name__}: {name}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class UnknownMaster(LookupFailure):
    pass


class UnknownPin(LookupFailure):
    pass


class DuplicateInstance(LookupFailure):
    pass


class UtilizationInfeasible(DeskPdError, ValueError):
    pass


class TooManyPorts(DeskPdError, ValueError):
    pass


class MacroOverflow(DeskPdError):
    pass


class SpecInfeasible(DeskPdError, ValueError):
    pass


class NoMovableCells(DeskPdError):
    pass


class RowOverflow(DeskPdError):
    pass


class NoFillerMasters(DeskPdError, ValueError):
    pass


class NoSinks(DeskPdError):
    pass


class BufferMasterMissing(LookupFailure):
    pass


class NoLegalSite(DeskPdError):
    pass


class CycleDetected(DeskPdError):
    pass


class CombinationalLoop(DeskPdError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("combinational loop through " + " -> ".join(cycle))


class NoClock(DeskPdError):
    pass


class NoBufferMaster(LookupFailure):
    pass


class UnfixableViolation(DeskPdError):
    pass


class NoSizeVariants(DeskPdError):
    pass


class Unroutable(DeskPdError):
    def __init__(self, message: str, hotspots: Any = None, overflow: int = 0):
        self.hotspots = hotspots
        self.overflow = overflow
        super().__init__(message)


class ConfigError(DeskPdError, ValueError):
    pass


class PreconditionViolated(DeskPdError):
    def __init__(self, requirement: str, step: str = ""):
        self.requirement = requirement
        self.step = step
        suffix = f" (step {step})" if step else ""
        super().__init__(f"precondition violated: {requirement}{suffix}")


class StepFailed(DeskPdError):
    def __init__(self, step: str, cause: BaseException):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step} failed: {cause}")
