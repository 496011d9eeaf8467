"""
Progress tracking and display utilities for training, simulation and sweeps
"""

import sys
import time
from datetime import timedelta


def format_duration(seconds):
    """Format time in seconds to a human-readable string"""
    return str(timedelta(seconds=int(seconds)))


class ProgressTracker:
    """
    Progress bar with ETA for epoch loops, Monte-Carlo points and sweep points
    """

    def __init__(
        self,
        total,
        description="Simulating",
        update_interval=0.5,
        enabled=True,
        stream=None,
    ):
        """
        Initialize a progress tracker

        Args:
            total: Total number of items (epochs, SNR points, sweep points)
            description: Label printed before the bar
            update_interval: Minimum time between redraws (seconds)
            enabled: When False nothing is printed
            stream: Output stream (defaults to stdout)
        """
        self.total = total
        self.description = description
        self.update_interval = update_interval
        self.enabled = enabled
        self.stream = stream
        self.current = 0
        self.status = ""
        self.start_time = None
        self.last_update_time = 0
        self.last_eta = None

    @property
    def _out(self):
        return self.stream if self.stream is not None else sys.stdout

    def start(self):
        """Start the progress tracker"""
        self.start_time = time.time()
        self.last_update_time = 0
        self.current = 0
        self._display_progress()
        return self

    def update(self, current=None, status=None, force=False):
        """
        Advance the tracker

        Args:
            current: Absolute progress value (incremented by 1 if None)
            status: Short text shown after the ETA, e.g. "val_loss=0.0123"
            force: Redraw even if update_interval hasn't elapsed
        """
        if current is not None:
            self.current = current
        else:
            self.current += 1
        if status is not None:
            self.status = status

        now = time.time()
        if force or (now - self.last_update_time) >= self.update_interval:
            self._display_progress()
            self.last_update_time = now

    def elapsed(self):
        if self.start_time is None:
            return 0.0
        return time.time() - float(self.start_time)

    def finish(self):
        """Mark the operation as complete"""
        self.current = self.total
        self._display_progress(force_newline=True)
        if self.enabled:
            print(
                f"{self.description} completed in {format_duration(self.elapsed())}",
                file=self._out,
            )

    def _display_progress(self, force_newline=False):
        if not self.enabled or self.total <= 0:
            return

        percent = min(100, self.current * 100 / self.total)

        eta_str = "calculating..."
        elapsed = self.elapsed()
        if self.current > 0 and elapsed > 0:
            items_per_sec = self.current / elapsed
            remaining_seconds = max(0, self.total - self.current) / items_per_sec
            eta_str = format_duration(remaining_seconds)
            self.last_eta = eta_str
        elif self.last_eta:
            eta_str = self.last_eta

        bar_length = 30
        filled_length = int(bar_length * min(self.current, self.total) / self.total)
        bar = "█" * filled_length + "░" * (bar_length - filled_length)

        message = (
            f"\r{self.description}: {self.current}/{self.total} "
            f"[{bar}] {percent:.1f}% ETA: {eta_str}"
        )
        if self.status:
            message += f" {self.status}"

        out = self._out
        out.write(message)
        if force_newline:
            out.write("\n")
        out.flush()


class StepProgress:
    """
    Step banners and a timing summary for multi-stage CLI commands
    """

    def __init__(self, steps, enabled=True, stream=None):
        """
        Initialize a step progress tracker

        Args:
            steps: List of step descriptions
            enabled: When False nothing is printed
            stream: Output stream (defaults to stdout)
        """
        self.steps = steps
        self.total_steps = len(steps)
        self.enabled = enabled
        self.stream = stream
        self.current_step = 0
        self.start_time = None
        self.step_start_times = {}
        self.step_durations = {}

    def _print(self, text=""):
        if self.enabled:
            print(text, file=self.stream if self.stream is not None else sys.stdout)

    def start(self):
        self.start_time = time.time()
        self._print(f"Starting workflow with {self.total_steps} steps")
        return self

    def start_step(self, step_index=None):
        """
        Start a new step

        Args:
            step_index: 1-based index of the step to start (defaults to next step)
        """
        if step_index is not None:
            self.current_step = step_index
        else:
            self.current_step += 1

        if self.current_step <= len(self.steps):
            step_name = self.steps[self.current_step - 1]
            self.step_start_times[self.current_step] = time.time()
            self._print("\n" + "=" * 80)
            self._print(f"Step {self.current_step} of {self.total_steps}: {step_name}")
            self._print("=" * 80)

        return self.current_step

    def end_step(self):
        """End the current step and display timing information"""
        if self.current_step in self.step_start_times:
            step_name = self.steps[self.current_step - 1]
            duration = time.time() - self.step_start_times[self.current_step]
            self.step_durations[self.current_step] = duration
            self._print(f"\nCompleted: {step_name} in {format_duration(duration)}")

    def finish(self):
        """Complete the workflow and display summary"""
        if not self.start_time:
            return
        total_duration = time.time() - self.start_time

        self._print("\n" + "=" * 80)
        self._print("Workflow Summary")
        self._print("=" * 80)
        for i, step in enumerate(self.steps):
            step_num = i + 1
            if step_num in self.step_durations:
                duration = self.step_durations[step_num]
                percent = (duration / total_duration) * 100 if total_duration > 0 else 0
                self._print(
                    f"Step {step_num}: {step} - {format_duration(duration)} ({percent:.1f}%)"
                )
            else:
                self._print(f"Step {step_num}: {step} - Not completed")
        self._print("-" * 80)
        self._print(f"Total time: {format_duration(total_duration)}")
        self._print("=" * 80)
