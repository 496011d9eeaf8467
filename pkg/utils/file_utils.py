"""
File utility functions for artifact directories, atomic writes and run metadata
"""

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

UNKNOWN_VERSION = "unknown"


def normalize_path(path):
    """Convert a path to the correct format for the current OS"""
    return str(Path(path))


def ensure_dir(directory):
    """Create a directory if it doesn't exist"""
    os.makedirs(directory, exist_ok=True)
    return directory


def get_basename(filepath, with_extension=False):
    """Extract the basename from a filepath"""
    basename = os.path.basename(filepath)
    if not with_extension:
        basename = os.path.splitext(basename)[0]
    return basename


def check_file_exists(filepath):
    """Check if a file exists and is a file (not a directory)"""
    return os.path.isfile(filepath)


def check_file_readable(filepath):
    """Check if a file exists and is readable"""
    return os.path.isfile(filepath) and os.access(filepath, os.R_OK)


def check_command_exists(command):
    """Check if a command exists in the system path"""
    return shutil.which(command) is not None


def create_run_structure(base_dir, run_name, unique=True):
    """Create the artifact directory for one run

    If `unique` and the target directory already exists, create a new one with
    an incremented number suffix (e.g., 'train (1)', 'train (2)', etc.).
    Without `unique` an existing directory is reused so reruns overwrite
    their own artifacts.
    """
    ensure_dir(base_dir)
    original_run_dir = os.path.join(base_dir, run_name)
    run_dir = original_run_dir

    if unique:
        counter = 1
        while os.path.exists(run_dir):
            run_dir = os.path.join(base_dir, f"{run_name} ({counter})")
            counter += 1

    ensure_dir(run_dir)
    return {
        "run": run_dir,
        "config": os.path.join(run_dir, "config.cfg"),
        "meta": os.path.join(run_dir, "run_meta.cfg"),
    }


def atomic_write_text(path, text):
    """Write text to `path` through a temp file in the same directory

    The destination either keeps its old content or gets the full new content;
    a failed write never leaves a partial file behind.
    """
    directory = os.path.dirname(os.path.abspath(path))
    ensure_dir(directory)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def get_version(repo_dir=None):
    """Return a `git describe` style version string, or 'unknown'"""
    if not check_command_exists("git"):
        return UNKNOWN_VERSION
    repo_dir = repo_dir or os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=repo_dir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except Exception:
        return UNKNOWN_VERSION
    if result.returncode != 0 or not result.stdout.strip():
        return UNKNOWN_VERSION
    return result.stdout.strip()


def write_key_values(path, items, header=None):
    """Write an ordered mapping as a `key=value` document"""
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    lines.extend(f"{key}={value}" for key, value in items.items())
    return atomic_write_text(path, "\n".join(lines) + "\n")
