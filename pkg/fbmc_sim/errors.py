"""Exception types raised across the simulator.

The CLI maps them onto exit codes (see ``fbmc_sim.cli``).
"""


class FbmcError(Exception):
    """Base class for all simulator errors."""

    def __init__(self, message, stage=None):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class GridDataError(FbmcError):
    """Missing input files, schema violations and broken grid invariants."""


class SensitivityError(FbmcError):
    """The network cannot be turned into PTDFs (disconnected or singular)."""


class SolverError(FbmcError):
    """An hourly LP did not reach an optimum."""

    def __init__(self, message, stage=None, hour=None, status=None):
        self.hour = hour
        self.status = status
        if hour is not None:
            message = f"hour {hour}: {message}"
        super().__init__(message, stage=stage)


class StageDependencyError(FbmcError):
    """A pipeline stage was requested before its prerequisites exist."""
