class DsubgradError(Exception):
    pass


class ConfigError(DsubgradError, ValueError):
    """Raised while building an experiment from its configuration."""


class HardFailure(DsubgradError):
    """Raised when a run cannot continue."""


# ============== network =============


class InvalidEdge(ConfigError):
    pass


class NotConnected(ConfigError):
    pass


class DisconnectedAfterRetries(ConfigError):
    pass


class AssumptionViolated(DsubgradError, ValueError):
    """A hypothesis of the convergence analysis does not hold.

    `value` carries the offending quantity (for example beta) so that the
    caller can decide whether to proceed.
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


# ============== objectives =============


class DimensionMismatch(DsubgradError, ValueError):
    pass


class UnknownProblem(ConfigError):
    pass


class BadParams(ConfigError):
    pass


class BranchUnavailable(DsubgradError):
    pass


# ============== oracle =============


class BoundInfeasible(HardFailure):
    pass


class OracleFailure(HardFailure):
    pass


# ============== diagnostics / harness =============


class WindowOutOfRange(DsubgradError, ValueError):
    pass


class SchemaMismatch(DsubgradError, ValueError):
    pass


class TraceIOError(HardFailure):
    pass


class ComparisonFailed(HardFailure):
    pass
