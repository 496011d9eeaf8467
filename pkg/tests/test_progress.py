import io
import os
import sys

sys.path.insert(
    0, os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
)  # noqa: E402
from utils.progress import ProgressTracker, StepProgress, format_duration  # noqa: E402


def test_format_duration():
    assert format_duration(65) == "0:01:05"
    assert format_duration(3600) == "1:00:00"


def test_tracker_draws_bar_and_status():
    stream = io.StringIO()
    tracker = ProgressTracker(4, "Training", update_interval=0, stream=stream).start()
    tracker.update(2, status="val_loss=0.5", force=True)
    tracker.finish()
    text = stream.getvalue()
    assert "Training: 2/4" in text
    assert "val_loss=0.5" in text
    assert "Training: 4/4" in text
    assert "Training completed in" in text


def test_disabled_tracker_is_silent():
    stream = io.StringIO()
    tracker = ProgressTracker(3, enabled=False, stream=stream).start()
    tracker.update()
    tracker.finish()
    assert stream.getvalue() == ""
    assert tracker.current == 3


def test_step_progress_banners():
    stream = io.StringIO()
    steps = StepProgress(["Train autoencoder", "Write artifacts"], stream=stream).start()
    assert steps.start_step() == 1
    steps.end_step()
    steps.start_step()
    steps.end_step()
    steps.finish()
    text = stream.getvalue()
    assert "Step 1 of 2: Train autoencoder" in text
    assert "Completed: Write artifacts" in text
    assert "Workflow Summary" in text
