"""Time and size guardrails for solver runs and benchmark sessions.

Prevents runaway solves, oversized oracle enumerations, and benchmark
sessions that outlive their budget. All thresholds are overridable via
environment variables.
"""

import os
import time

from ifdp.errors import SolveTimeout


MAX_SOLVE_SECONDS = float(os.environ.get("IFDP_TIME_LIMIT", "60"))
MAX_WORKERS = int(os.environ.get("IFDP_MAX_WORKERS", "4"))
MAX_SESSION_MINUTES = int(os.environ.get("IFDP_MAX_SESSION_MINUTES", "60"))
MAX_ORACLE_ALLOCATIONS = int(os.environ.get("IFDP_MAX_ORACLE_ALLOCATIONS", "250000"))
LOG_LEVEL = os.environ.get("IFDP_LOG_LEVEL", "WARNING").upper()


def resolve_time_limit(time_limit):
    """Return time_limit, or the environment default when it is None."""
    if time_limit is None:
        return MAX_SOLVE_SECONDS
    if time_limit <= 0:
        raise ValueError(f"time_limit must be positive, got {time_limit!r}")
    return float(time_limit)


class SolveGuard:
    """Tracks the wall-clock budget of one solver call.

    Create at the start of a solve. Loops call check_timeout() between
    iterations and pass remaining() down to nested searches.
    """

    def __init__(self, time_limit=None):
        self.time_limit = resolve_time_limit(time_limit)
        self._start = time.monotonic()

    def elapsed(self):
        """Return seconds since this guard was created."""
        return time.monotonic() - self._start

    def remaining(self):
        """Return the seconds left, floored at 1e-6 so it is always a valid time limit."""
        return max(1e-6, self.time_limit - self.elapsed())

    def expired(self):
        return self.elapsed() >= self.time_limit

    def check_timeout(self):
        """Raise SolveTimeout if the budget is spent."""
        elapsed = self.elapsed()
        if elapsed >= self.time_limit:
            raise SolveTimeout(
                f"Solve timeout: {elapsed:.2f}s elapsed (limit={self.time_limit:g}s)"
            )

    def child(self, time_limit=None):
        """Return a guard bounded by both this guard and time_limit."""
        budget = self.remaining()
        if time_limit is not None:
            budget = min(budget, time_limit)
        return SolveGuard(budget)


class SessionGuard:
    """Tracks a benchmark session and enforces its wall-clock budget."""

    def __init__(self, max_minutes=MAX_SESSION_MINUTES):
        self.max_minutes = max_minutes
        self._start = time.monotonic()
        self.completed_runs = 0

    def check_timeout(self):
        """Raise RuntimeError if the session has exceeded max_minutes."""
        elapsed = self.elapsed_minutes()
        if elapsed > self.max_minutes:
            raise RuntimeError(
                f"Session timeout: {elapsed:.1f} minutes elapsed "
                f"(limit={self.max_minutes}). Remaining cells skipped."
            )

    def elapsed_minutes(self):
        """Return minutes since this guard was created."""
        return (time.monotonic() - self._start) / 60

    def record_run(self):
        self.completed_runs += 1

    def summary(self):
        """Return a dict summarizing the session state."""
        return {
            "elapsed_minutes": round(self.elapsed_minutes(), 2),
            "completed_runs": self.completed_runs,
            "max_minutes": self.max_minutes,
        }
