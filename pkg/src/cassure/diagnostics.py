"""Source locations and diagnostics shared by the parsers and checkers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int      # 1-based
    column: int    # 1-based
    length: int = 1

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    span: SourceSpan | None = None

    def __str__(self):
        loc = f"{self.span}: " if self.span else ""
        return f"{loc}{self.severity}: {self.message}"


class CassureError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CassureError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class BindError(CassureError):
    pass


class EvalError(CassureError):
    pass


class BuildError(CassureError):
    pass


class SolverError(CassureError):
    pass
