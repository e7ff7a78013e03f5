"""Live progress monitor for benchmark runs.

Runs a background thread that periodically prints a table of benchmark
cells: how many instances finished, how many failed, and the mean solve
time so far.
"""

import os
import threading
import time


DEFAULT_INTERVAL = 30  # seconds between reports


def _format_status_line(cells, elapsed_minutes):
    """Format a compact progress table from {cell: counters}."""
    if not cells:
        return f"  [Monitor] No cells started (elapsed: {elapsed_minutes:.1f}m)"

    lines = [
        f"\n  [Monitor] {len(cells)} cell(s) | elapsed: {elapsed_minutes:.1f}m",
        f"  {'Scenario':<28s} {'Solver':<22s} {'Done':>9s} {'Failed':>7s} {'Mean s':>9s}",
        f"  {'-'*28} {'-'*22} {'-'*9} {'-'*7} {'-'*9}",
    ]
    for (scenario, solver), c in sorted(cells.items()):
        done = f"{c['done']}/{c['total']}"
        mean = c["time"] / c["done"] if c["done"] else 0.0
        lines.append(f"  {scenario:<28s} {solver:<22s} {done:>9s} {c['failed']:>7d} {mean:>9.3f}")
    return "\n".join(lines)


class ProgressMonitor:
    """Collects per-cell progress from worker threads and prints it periodically."""

    def __init__(self, interval=None):
        self.interval = interval or int(os.environ.get("IFDP_MONITOR_INTERVAL", DEFAULT_INTERVAL))
        self._stop_event = threading.Event()
        self._lock = threading.Lock()
        self._thread = None
        self._start_time = time.monotonic()
        self._cells = {}

    def register(self, scenario, solver, total):
        with self._lock:
            self._cells[(scenario, solver)] = {"total": total, "done": 0, "failed": 0, "time": 0.0}

    def record(self, scenario, solver, seconds, failed=False):
        """Count one finished instance of a cell."""
        with self._lock:
            cell = self._cells.setdefault(
                (scenario, solver), {"total": 0, "done": 0, "failed": 0, "time": 0.0}
            )
            cell["done"] += 1
            cell["time"] += seconds
            if failed:
                cell["failed"] += 1

    def snapshot(self):
        with self._lock:
            return {key: dict(value) for key, value in self._cells.items()}

    def start(self):
        """Start the background reporting thread."""
        self._thread = threading.Thread(target=self._run, daemon=True, name="ifdp-progress-monitor")
        self._thread.start()

    def stop(self):
        """Signal the monitor to stop and wait for it."""
        self._stop_event.set()
        if self._thread and self._thread.is_alive():
            self._thread.join(timeout=5)

    def _run(self):
        while not self._stop_event.wait(self.interval):
            self.print_now()

    def print_now(self):
        """Print progress immediately."""
        elapsed = (time.monotonic() - self._start_time) / 60
        print(_format_status_line(self.snapshot(), elapsed), flush=True)
