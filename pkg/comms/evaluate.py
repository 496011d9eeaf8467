"""
Monte-Carlo block-error-rate estimation, BLER curves and threshold-SNR extraction
"""

import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Protocol

import numpy as np

from utils.progress import ProgressTracker
from utils.random_streams import EVALUATION, make_rng, random_bits

CSV_HEADER = "snr_db,blocks,block_errors,bler"


class UnbracketedError(ValueError):
    """The target BLER is not crossed between two points of the curve"""


class System(Protocol):
    """Anything that carries k-bit messages over the channel at a given SNR"""

    k: int

    def transmit(self, bits, snr_db, rng):
        """Return hard-decided bits, same shape as `bits`"""
        ...


@dataclass(frozen=True)
class StopRule:
    min_block_errors: int = 100
    max_blocks: int = 10_000_000
    batch: int = 10_000

    def __post_init__(self):
        if self.min_block_errors < 1 or self.max_blocks < 1 or self.batch < 1:
            raise ValueError("Stop rule counts must be positive")


@dataclass(frozen=True)
class BlerPoint:
    snr_db: float
    blocks: int
    block_errors: int

    def __post_init__(self):
        if self.blocks < 1 or not 0 <= self.block_errors <= self.blocks:
            raise ValueError(
                f"Invalid point: {self.block_errors} errors over {self.blocks} blocks"
            )

    @property
    def bler(self):
        return self.block_errors / self.blocks


def standard_error(point):
    """Binomial standard error of a point's BLER estimate"""
    p = point.bler
    return math.sqrt(p * (1.0 - p) / point.blocks)


@dataclass
class BlerCurve:
    points: List[BlerPoint]
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        snrs = [p.snr_db for p in self.points]
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError("BLER curve SNRs must be strictly increasing")

    def __len__(self):
        return len(self.points)

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    @property
    def bler(self):
        return np.array([p.bler for p in self.points])

    def to_csv(self):
        lines = [f"# {key}={value}" for key, value in self.metadata.items()]
        lines.append(CSV_HEADER)
        for p in self.points:
            lines.append(f"{p.snr_db:.12g},{p.blocks},{p.block_errors},{p.bler:.12g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        metadata = {}
        points = []
        header_seen = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                metadata[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise ValueError(f"Unexpected BLER CSV header: {line}")
                header_seen = True
                continue
            snr, blocks, errors, _ = line.split(",")
            points.append(BlerPoint(float(snr), int(blocks), int(errors)))
        if not header_seen:
            raise ValueError("BLER CSV has no header row")
        return cls(points, metadata)


def hard_decision(probs):
    """Bit decisions p > 0.5 (0.5 itself maps to 0)"""
    return (np.asarray(probs) > 0.5).astype(np.int8)


def estimate_bler(system, snr_db, stop, rng):
    """
    Simulate blocks until `min_block_errors` errors or `max_blocks` blocks

    Blocks are drawn in batches; when the error target is hit inside a batch
    the count is cut at the block carrying the last needed error, so the
    result does not depend on where the batch boundary falls relative to it.

    Returns:
        BlerPoint
    """
    blocks = 0
    errors = 0
    while blocks < stop.max_blocks:
        size = min(stop.batch, stop.max_blocks - blocks)
        bits = random_bits(rng, size, system.k)
        decoded = np.asarray(system.transmit(bits, snr_db, rng))
        failed = np.any(decoded != bits, axis=1)
        needed = stop.min_block_errors - errors
        failed_at = np.flatnonzero(failed)
        if failed_at.size >= needed:
            blocks += int(failed_at[needed - 1]) + 1
            errors += needed
            break
        blocks += size
        errors += int(failed_at.size)
    return BlerPoint(float(snr_db), blocks, errors)


def _bler_point_worker(args):
    system, snr_db, stop, seed, index = args
    return index, estimate_bler(system, snr_db, stop, make_rng(seed, EVALUATION, index))


def bler_curve(system, snr_grid, stop, seed, metadata=None, workers=1, verbose=False):
    """
    One BLER estimate per grid SNR

    Point i uses the stream (seed, EVALUATION, i), so points are independent
    of each other and of the number of workers.

    Args:
        system: System to simulate
        snr_grid: Strictly increasing SNRs in dB
        stop: StopRule
        seed: Master seed
        metadata: Extra key/value pairs stored on the curve
        workers: Process count (1 runs in-process)
        verbose: Show a progress bar

    Returns:
        BlerCurve
    """
    grid = [float(s) for s in snr_grid]
    meta = {"seed": str(seed), "k": str(system.k)}
    if hasattr(system, "n"):
        meta["n"] = str(system.n)
    meta.update({key: str(value) for key, value in (metadata or {}).items()})

    jobs = [(system, snr, stop, seed, index) for index, snr in enumerate(grid)]
    results: Dict[int, BlerPoint] = {}
    tracker = ProgressTracker(len(jobs), "BLER points", enabled=verbose)
    tracker.start()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_bler_point_worker, job) for job in jobs]
            for future in as_completed(futures):
                index, point = future.result()
                results[index] = point
                tracker.update(len(results), status=f"{point.snr_db:g} dB")
    else:
        for job in jobs:
            index, point = _bler_point_worker(job)
            results[index] = point
            tracker.update(len(results), status=f"{point.snr_db:g} dB: {point.bler:.3g}")
    tracker.finish()
    return BlerCurve([results[i] for i in range(len(jobs))], meta)


def threshold_snr(curve, target=1e-3):
    """
    Smallest SNR at which the BLER reaches `target`, interpolated on log10(BLER)

    Uses the first point at or below the target and the point before it.
    A zero-error point stands in with BLER 1/blocks; when that floor is not
    below the target the point's own SNR is returned.
    """
    if not 0.0 < target < 1.0:
        raise ValueError(f"Target BLER must be in (0, 1), got {target}")
    points = curve.points
    if not points:
        raise UnbracketedError("Empty BLER curve")

    for index, p2 in enumerate(points):
        if p2.bler > target:
            continue
        if p2.bler == target:
            return p2.snr_db
        if index == 0:
            raise UnbracketedError(
                f"First point ({p2.snr_db:g} dB, BLER {p2.bler:.3g}) is already below "
                f"{target:g}; extend the grid to lower SNR"
            )
        p2_bler = p2.bler
        if p2_bler == 0.0:
            p2_bler = 1.0 / p2.blocks
            if p2_bler >= target:
                return p2.snr_db
        p1 = points[index - 1]
        fraction = math.log10(p1.bler / target) / math.log10(p1.bler / p2_bler)
        return p1.snr_db + (p2.snr_db - p1.snr_db) * fraction

    last = points[-1]
    raise UnbracketedError(
        f"BLER never reaches {target:g}; nearest point {last.snr_db:g} dB "
        f"has BLER {last.bler:.3g}"
    )
