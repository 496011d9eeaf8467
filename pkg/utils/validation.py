"""
Validation utilities for experiment configs and command-line values

Configs are flat `key=value` documents with `#` comments. Parsers return
(is_valid, message, value) tuples and never raise for user mistakes.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List

from .file_utils import check_file_exists, check_file_readable

SWEEP_PREFIX = "sweep."
POLAR_ENERGY_PREFIX = "power.polar_energy."


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got '{text}'")


def _choice(*options):
    def parse(text):
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got '{text}'")
        return value

    return parse


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {value}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise ValueError(f"expected a non-negative integer, got {value}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise ValueError(f"expected a positive number, got {text}")
    return value


def _non_negative_float(text):
    value = float(text)
    if not value >= 0 or not math.isfinite(value):
        raise ValueError(f"expected a non-negative number, got {text}")
    return value


def _finite_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text}")
    return value


def _probability(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise ValueError(f"expected a value in (0, 1), got {text}")
    return value


def _dropout_rate(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise ValueError(f"expected a rate in [0, 1), got {text}")
    return value


def _text(text):
    value = text.strip()
    if not value:
        raise ValueError("expected a non-empty value")
    return value


def _snr_grid(text):
    is_valid, message, _ = parse_snr_grid(text)
    if not is_valid:
        raise ValueError(message)
    return text.strip()


# key -> (parser, default text)
CONFIG_SCHEMA = {
    "model.n": (_positive_int, "32"),
    "model.k": (_positive_int, "16"),
    "model.q": (_positive_int, "500"),
    "model.v": (_positive_int, "4"),
    "model.domain": (_choice("walsh", "time"), "walsh"),
    "model.activation": (_choice("leaky_relu", "relu"), "leaky_relu"),
    "model.leaky_slope": (_non_negative_float, "0.01"),
    "model.batch_norm": (_parse_bool, "true"),
    "model.dropout": (_dropout_rate, "0.0"),
    "model.l2": (_non_negative_float, "1e-05"),
    "model.scaling": (_choice("orthonormal", "analysis"), "orthonormal"),
    "train.s_db": (_finite_float, "3.0"),
    "train.delta_db": (_non_negative_float, "2.0"),
    "train.batch": (_positive_int, "50000"),
    "train.t_enc": (_positive_int, "100"),
    "train.t_dec": (_positive_int, "300"),
    "train.epochs": (_positive_int, "500"),
    "train.lr": (_positive_float, "0.001"),
    "train.patience": (_positive_int, "20"),
    "train.lr_floor": (_positive_float, "1e-10"),
    "train.validation_size": (_positive_int, "50000"),
    "eval.snr_grid": (_snr_grid, "0:0.5:5"),
    "eval.target_bler": (_probability, "0.001"),
    "eval.min_errors": (_positive_int, "100"),
    "eval.max_blocks": (_positive_int, "10000000"),
    "eval.batch": (_positive_int, "10000"),
    "power.eta": (_positive_float, "8e14"),
    "power.fs": (_positive_float, "5e9"),
    "power.converters": (_choice("walsh", "ti", "polar"), "walsh"),
    "power.polar_reference_n": (_positive_int, "256"),
    "power.polar_provenance": (_text, "placeholder (non-normative)"),
    # per-block SCL energy (J) by list size; any power.polar_energy.<L> is accepted
    POLAR_ENERGY_PREFIX + "2": (_positive_float, "1.2e-08"),
    POLAR_ENERGY_PREFIX + "4": (_positive_float, "2e-08"),
    POLAR_ENERGY_PREFIX + "8": (_positive_float, "3.6e-08"),
    "polar.n": (_positive_int, "32"),
    "polar.k_info": (_positive_int, "16"),
    "polar.crc_len": (_non_negative_int, "6"),
    "polar.list_size": (_positive_int, "8"),
    "polar.construction": (_choice("5g", "bhattacharyya"), "5g"),
    "polar.design_snr_db": (_finite_float, "2.0"),
    "seed": (_non_negative_int, "0"),
}


def config_parser(key):
    """Value parser for a config key, or None for unknown keys"""
    if key in CONFIG_SCHEMA:
        return CONFIG_SCHEMA[key][0]
    if key.startswith(POLAR_ENERGY_PREFIX):
        suffix = key[len(POLAR_ENERGY_PREFIX) :]
        if suffix.isdigit() and str(int(suffix)) == suffix and int(suffix) > 0:
            return _positive_float
    return None


@dataclass
class ExperimentConfig:
    """Resolved, typed config values plus any sweep axes"""

    values: Dict[str, object]
    sweep: Dict[str, List[str]] = field(default_factory=dict)
    source: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def polar_energies(self):
        """Per-block SCL decoding energy by list size"""
        return {
            int(key[len(POLAR_ENERGY_PREFIX) :]): value
            for key, value in self.values.items()
            if key.startswith(POLAR_ENERGY_PREFIX)
        }

    def echo(self):
        """Re-loadable key=value text of every resolved setting"""
        lines = [f"{key}={self.source[key]}" for key in sorted(self.source)]
        lines.extend(
            f"{SWEEP_PREFIX}{key}={','.join(values)}" for key, values in sorted(self.sweep.items())
        )
        return "\n".join(lines) + "\n"

    def with_overrides(self, overrides):
        """
        Copy with some keys replaced by raw text values

        Returns:
            tuple: (is_valid, message, ExperimentConfig)
        """
        raw = dict(self.source)
        raw.update({key: str(value) for key, value in overrides.items()})
        return validate_config(raw)


def parse_config_text(text):
    """
    Split a config document into raw key/value strings

    Returns:
        tuple: (is_valid, message, dict)
    """
    raw = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            return False, f"Line {number}: expected key=value, got '{stripped}'", None
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            return False, f"Line {number}: empty key", None
        if key in raw:
            return False, f"Line {number}: duplicate key '{key}'", None
        raw[key] = value
    return True, "Config parsed", raw


def validate_config(raw):
    """
    Type-check raw values, fill defaults and collect sweep axes

    Returns:
        tuple: (is_valid, message, ExperimentConfig)
    """
    sweep = {}
    source = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    for key, value in raw.items():
        if key.startswith(SWEEP_PREFIX):
            target = key[len(SWEEP_PREFIX) :]
            parser = config_parser(target)
            if parser is None:
                return False, f"Unknown sweep key: {target}", None
            options = [v.strip() for v in value.split(",") if v.strip()]
            if not options:
                return False, f"Sweep over {target} lists no values", None
            for option in options:
                try:
                    parser(option)
                except ValueError as e:
                    return False, f"Invalid sweep value for {target}: {e}", None
            sweep[target] = options
            continue
        if config_parser(key) is None:
            return False, f"Unknown config key: {key}", None
        source[key] = value

    values = {}
    for key, text in source.items():
        try:
            values[key] = config_parser(key)(text)
        except ValueError as e:
            return False, f"Invalid value for {key}: {e}", None

    if values["polar.k_info"] + values["polar.crc_len"] > values["polar.n"]:
        return False, "polar.k_info + polar.crc_len exceeds polar.n", None

    return True, "Config is valid", ExperimentConfig(values, sweep, source)


def validate_config_file(filepath):
    """
    Validate and load a config file

    Returns:
        tuple: (is_valid, message, ExperimentConfig)
    """
    if not filepath:
        return False, "No config path provided", None
    if not check_file_exists(filepath):
        return False, f"Config file does not exist: {filepath}", None
    if not check_file_readable(filepath):
        return False, f"Config file exists but is not readable: {filepath}", None
    with open(filepath, "r", encoding="utf-8") as f:
        is_valid, message, raw = parse_config_text(f.read())
    if not is_valid:
        return False, f"{filepath}: {message}", None
    return validate_config(raw)


def parse_snr_grid(text):
    """
    Parse `start:step:stop` (inclusive) or a comma-separated list of dB values

    Returns:
        tuple: (is_valid, message, list of floats)
    """
    if not text or not text.strip():
        return False, "Empty SNR grid", None
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                return False, f"SNR grid must be start:step:stop, got '{text}'", None
            start, step, stop = parts
            if step <= 0:
                return False, f"SNR grid step must be positive, got {step}", None
            if stop < start:
                return False, f"SNR grid stop {stop} is below start {start}", None
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = [round(start + i * step, 10) for i in range(count)]
        else:
            grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        return False, f"SNR grid values must be numbers, got '{text}'", None

    if not grid:
        return False, "Empty SNR grid", None
    if any(b <= a for a, b in zip(grid, grid[1:])):
        return False, "SNR grid must be strictly increasing", None
    if not all(math.isfinite(v) for v in grid):
        return False, "SNR grid values must be finite", None
    return True, "SNR grid is valid", grid


def expand_sweep(config):
    """
    Cartesian product of the sweep axes

    Returns:
        list: (label, overrides dict) per point, axes in sorted key order
    """
    if not config.sweep:
        return [("point-000", {})]
    keys = sorted(config.sweep)
    points = []
    for index, combo in enumerate(itertools.product(*(config.sweep[key] for key in keys))):
        points.append((f"point-{index:03d}", dict(zip(keys, combo))))
    return points
