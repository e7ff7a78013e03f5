"""Exception types raised across the IFDP toolkit.

Each error subclasses the builtin that matches its nature so callers may
catch either the specific type or the builtin. Solver outcomes such as
Infeasible or NoSolution are statuses on a SolveReport, never exceptions.
"""


class IfdpError(Exception):
    """Base class for every toolkit error."""


class MalformedInstance(IfdpError, ValueError):
    """An instance violates one or more structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        joined = "; ".join(self.violations)
        super().__init__(f"Malformed instance ({len(self.violations)} problem(s)): {joined}")


class EmptyFlows(IfdpError, ValueError):
    """An instance carries no flows."""


class ParseError(IfdpError, ValueError):
    """A file could not be parsed. Carries the line and/or field at fault."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class MalformedProblem(IfdpError, ValueError):
    """An LP/MIP problem has inconsistent dimensions or non-finite data."""


class PreconditionViolated(IfdpError, ValueError):
    """An input violates an operation's precondition, such as the 3-SAT reduction assumptions."""


class PremiseViolated(IfdpError, ValueError):
    """An instance does not have the single-bottleneck structure EDF needs."""


class TooLarge(IfdpError, ValueError):
    """An instance exceeds the exhaustive oracle's caps."""


class NoDeadlines(IfdpError, ValueError):
    """A slice grid was requested for an instance without any bounded deadline."""


class NumericalBreakdown(IfdpError, RuntimeError):
    """The simplex lost numerical control (tiny pivots, singular basis, drift)."""


class InfeasibleState(IfdpError, RuntimeError):
    """A master-problem state still carries unmet demand."""


class Unreachable(IfdpError, RuntimeError):
    """Some flow's destination cannot be reached from its origin."""


class Disconnected(IfdpError, RuntimeError):
    """Scenario sampling could not find a connected origin/destination pair."""


class NeverFeasible(IfdpError, RuntimeError):
    """Deadline calibration found no feasible deadline factor in its bracket."""


class SolveTimeout(IfdpError, TimeoutError):
    """A solver exceeded its wall-clock budget."""
