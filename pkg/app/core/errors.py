"""
Error Types

Exception hierarchy shared by the engine, the experiment harness and the CLI.
"""

from dataclasses import dataclass
from typing import List, Optional


@dataclass(frozen=True)
class Violation:
    """One violated configuration constraint."""
    field: str
    constraint: str

    def __str__(self) -> str:
        return f"{self.field}: {self.constraint}"


class CleanupError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CleanupError):
    """A configuration value violates a documented constraint."""

    def __init__(self, violations: List[Violation], message: Optional[str] = None):
        self.violations = list(violations)
        super().__init__(message or "; ".join(str(v) for v in self.violations))

    @property
    def fields(self) -> List[str]:
        return [v.field for v in self.violations]


class SpecValidationError(ConfigurationError):
    """An experiment spec has one or more invalid values."""


class UnknownKeyError(ConfigurationError):
    """The configuration document contains a key no section accepts."""


class ConfigParseError(ConfigurationError):
    """The configuration document is not valid TOML."""

    def __init__(self, detail: str, line: Optional[int] = None):
        self.line = line
        where = f"line {line}" if line is not None else "unknown line"
        super().__init__(
            [Violation("document", detail)],
            message=f"Config parse error at {where}: {detail}",
        )


class ProtocolError(CleanupError):
    """The caller broke the step protocol (wrong action count, illegal slot)."""


class LifecycleError(CleanupError):
    """The environment was used outside its episode lifecycle."""


class AgentLookupError(CleanupError, LookupError):
    """An agent id does not exist in this environment."""


class OutputDirectoryError(CleanupError, OSError):
    """The experiment output directory cannot be written."""
