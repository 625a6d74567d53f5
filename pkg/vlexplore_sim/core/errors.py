"""
Exception hierarchy for the simulator.

Every error carries an ``error_code`` so the CLI and the tool server can turn
it into the standard JSON response envelope without inspecting messages.
"""

from typing import List, Optional


class SimulationError(Exception):
    """Base class for all simulator errors."""

    error_code = "SIMULATION_ERROR"

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if error_code:
            self.error_code = error_code


class ConfigurationError(SimulationError):
    """Invalid configuration, spec file or trial setup.

    ``problems`` lists every issue found when a validator collects them in a
    single pass.
    """

    error_code = "CONFIGURATION_ERROR"

    def __init__(self, message: str, problems: Optional[List[str]] = None,
                 error_code: Optional[str] = None):
        super().__init__(message, error_code)
        self.problems = list(problems or [])

    def __str__(self):
        if not self.problems:
            return self.message
        lines = [self.message] + [f"  - {p}" for p in self.problems]
        return "\n".join(lines)


class MapLoadError(ConfigurationError):
    """Map raster or sidecar could not be read; names the offending field."""

    error_code = "MAP_LOAD_ERROR"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SectionParseError(ConfigurationError):
    """Syntax error in a line-oriented section file."""

    error_code = "PARSE_ERROR"

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class TemplateParseError(SectionParseError):
    """Syntax error inside a prompt template."""

    error_code = "TEMPLATE_PARSE_ERROR"


class CollisionError(SimulationError):
    """A geometric query was issued from inside an obstacle."""

    error_code = "COLLISION_ERROR"


class DimensionMismatchError(SimulationError):
    error_code = "DIMENSION_MISMATCH"


class ProviderError(SimulationError):
    """The embedding provider failed on a specific prompt."""

    error_code = "PROVIDER_ERROR"

    def __init__(self, prompt: str, message: str):
        super().__init__(f"failed to encode prompt {prompt!r}: {message}")
        self.prompt = prompt


class FitError(SimulationError):
    error_code = "FIT_ERROR"


class MetricsError(SimulationError):
    error_code = "METRICS_ERROR"


class IllegalTransitionError(SimulationError):
    """The navigation mode machine was asked for an edge it does not have."""

    error_code = "ILLEGAL_TRANSITION"


# Exit codes used by the command line entry point
EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, ConfigurationError):
        return EXIT_SPEC_ERROR
    return EXIT_RUNTIME_ERROR
