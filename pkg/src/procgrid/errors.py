"""Exception types shared across the toolchain."""

from __future__ import annotations

from dataclasses import dataclass, field


class ProcgridError(Exception):
    """Base class for all toolchain errors."""


class ParseError(ProcgridError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class TypeIssue:
    """One type-check violation; checking accumulates these instead of stopping."""

    message: str
    signal: str | None = None
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.message}"


class TypeCheckFailure(ProcgridError):
    def __init__(self, errors: list[TypeIssue]):
        super().__init__(
            f"{len(errors)} type error(s):\n" + "\n".join(f"  {e}" for e in errors)
        )
        self.errors = errors


class ElaborationError(ProcgridError):
    pass


class CapacityError(ProcgridError):
    pass


@dataclass
class OffsetBlockers:
    """Why one candidate offset was rejected for a signal."""

    offset: int
    blockers: tuple[str, ...] = field(default_factory=tuple)


class SchedulingConflict(ProcgridError):
    def __init__(self, signal: str, attempts: list[OffsetBlockers]):
        lines = [f"cannot schedule signal {signal}:"]
        for a in attempts:
            names = ", ".join(a.blockers) or "<none>"
            lines.append(f"  offset {a.offset}: blocked by {names}")
        super().__init__("\n".join(lines))
        self.signal = signal
        self.attempts = attempts


class NoReserveError(ProcgridError):
    pass


class TapRouteError(ProcgridError):
    pass


class FileFormatError(ProcgridError):
    pass


class MissingFile(ProcgridError):
    pass


class TypeMismatch(ProcgridError):
    """Operands whose value types must agree do not."""


class UnknownSignal(ProcgridError):
    pass


class UnknownScope(ProcgridError):
    pass


class UnknownInstance(ProcgridError):
    pass


class BadSpec(ProcgridError):
    """Malformed probe/binding/command argument."""


class ScriptError(ProcgridError):
    def __init__(self, message: str, line: int):
        super().__init__(f"script line {line}: {message}")
        self.line = line


class SessionError(ProcgridError):
    """Command issued in a state that cannot accept it."""
