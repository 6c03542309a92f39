"""Exception types shared across the solver."""


class AxibilayerError(Exception):
    """Base class for all solver errors."""


class DegenerateMesh(AxibilayerError):
    """A curve violates a basic mesh requirement (zero edge, vanishing
    averaged normal, interior node on the axis)."""


class AssumptionViolated(AxibilayerError):
    """A mesh fails one of the scheme's admissibility conditions.

    Carries the name of the violated condition and the offending location
    so callers can report it.
    """

    def __init__(self, assumption, phase=None, node=None, detail=""):
        self.assumption = assumption
        self.phase = phase
        self.node = node
        self.detail = detail
        where = ""
        if phase is not None:
            where = f" (phase {phase}" + (f", node {node})" if node is not None else ")")
        super().__init__(f"assumption {assumption} violated{where}: {detail}")


class NonFiniteInput(AxibilayerError):
    """NaN or Inf encountered in input data."""


class SingularMatrix(AxibilayerError):
    """Direct factorization failed or produced a negligible pivot."""


class NewtonDiverged(AxibilayerError):
    """Constraint Newton iteration failed to converge."""


class SingularJacobian(AxibilayerError):
    """Constraint Jacobian is numerically singular."""


class RootNotBracketed(AxibilayerError):
    """Scalar root finding could not bracket a solution."""


class ConfigError(AxibilayerError):
    """Invalid run configuration."""


class MissingFile(ConfigError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key, line):
        self.key = key
        self.line = line
        super().__init__(f"unknown config key '{key}' (line {line})")


class InvalidValue(ConfigError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"invalid value for '{key}': {reason}")
