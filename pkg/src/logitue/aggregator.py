"""Streaming top-M tracking with patience-window early stopping.

Sequence score = mean of the final top-M token scores; min-max
normalization maps raw scores into [0, 1] using training-set extrema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import _kernels
from .scoring import get_scorer

MODE_EARLY_STOP = "early_stop"
MODE_FULL = "full_generation"
MODE_FRACTION = "fixed_fraction"

_MODE_CODES = {
    MODE_EARLY_STOP: _kernels.MODE_EARLY_STOP,
    MODE_FULL: _kernels.MODE_FULL,
    MODE_FRACTION: _kernels.MODE_FRACTION,
}

_STOP_NAMES = {
    _kernels.STOP_EOS: "eos",
    _kernels.STOP_PATIENCE: "patience",
    _kernels.STOP_FRACTION: "fraction",
    _kernels.STOP_END_OF_STREAM: "end_of_stream",
}


@dataclass
class StoppingConfig:
    M: int = 5
    W: int = 10  # default patience 2M
    mode: str = MODE_EARLY_STOP
    fraction: float = 1.0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.W < 1:
            raise ValueError("W must be >= 1")
        if self.mode not in _MODE_CODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError("fraction must be in (0, 1]")


@dataclass
class ScoredSequence:
    record_id: str
    tau: int
    raw_score: float
    tokens_consumed: int
    stopped_by: str
    norm_score: Optional[float] = None


@dataclass
class NormStats:
    min: float
    max: float

    def __post_init__(self):
        if not (self.min <= self.max):
            raise ValueError("min must be <= max")


class TopMTracker:
    """Capacity-M score set with a patience counter.

    Entry requires a score strictly greater than the current minimum;
    among equal minima the oldest entry (smallest step) is evicted.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.entries: List[tuple] = []  # (step, score)
        self.patience = 0
        self._last_step = 0

    def observe(self, step: int, score: float) -> bool:
        if step <= self._last_step:
            raise ValueError(f"step indices must be strictly increasing (got {step})")
        if not math.isfinite(score):
            raise ValueError(f"non-finite score at step {step}")
        self._last_step = step
        if len(self.entries) < self.capacity:
            self.entries.append((step, float(score)))
            self.patience = 0
            return True
        mi = min(range(len(self.entries)), key=lambda i: (self.entries[i][1], self.entries[i][0]))
        if score > self.entries[mi][1]:
            self.entries[mi] = (step, float(score))
            self.patience = 0
            return True
        self.patience += 1
        return False

    def should_stop(self, is_eos: bool, W: int) -> bool:
        return is_eos or (len(self.entries) == self.capacity and self.patience >= W)

    def raw_score(self) -> float:
        # Sequential sum in step order; bit-identical to the batch kernel.
        acc = 0.0
        for _, score in sorted(self.entries):
            acc += score
        return acc / len(self.entries)


def run_stream(record, config: StoppingConfig, scorer) -> ScoredSequence:
    """Apply the top-M/patience loop to one record, scoring tokens lazily.

    Tokens past the stopping time are never scored. The fixed_fraction
    mode consumes ceil(fraction * T) tokens (at least 1); fraction 1.0 is
    identical to full_generation.
    """
    if isinstance(scorer, str):
        scorer = get_scorer(scorer)
    T = record.num_steps
    if T < 1:
        raise ValueError(f"record {record.id!r} has no steps")
    if config.mode == MODE_FRACTION:
        limit = min(max(int(math.ceil(config.fraction * T)), 1), T)
    else:
        limit = T

    tracker = TopMTracker(config.M)
    tau = limit
    stopped_by = None
    for t in range(1, limit + 1):
        step = record.steps[t - 1]
        try:
            score = scorer(step.topk_logits)
        except ValueError as exc:
            raise ValueError(f"step {t} of record {record.id!r}: {exc}") from exc
        tracker.observe(t, score)
        if step.is_eos:
            tau = t
            stopped_by = "eos"
            break
        if config.mode == MODE_EARLY_STOP and tracker.should_stop(False, config.W):
            tau = t
            stopped_by = "patience"
            break
    if stopped_by is None:
        tau = limit
        if config.mode == MODE_FRACTION and limit < T:
            stopped_by = "fraction"
        else:
            stopped_by = "end_of_stream"

    return ScoredSequence(
        record_id=record.id,
        tau=tau,
        raw_score=tracker.raw_score(),
        tokens_consumed=tau,
        stopped_by=stopped_by,
    )


def run_scores(record_id: str, scores: np.ndarray, config: StoppingConfig,
               last_is_eos: bool) -> ScoredSequence:
    """Kernel-backed variant of run_stream over precomputed token scores.

    Used by the sweep harness on cached score arrays; bit-equivalent to
    run_stream on the same stream.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    tau, raw, reason = _kernels.topm_stream(
        scores, config.M, config.W, _MODE_CODES[config.mode], config.fraction, last_is_eos
    )
    return ScoredSequence(
        record_id=record_id,
        tau=int(tau),
        raw_score=float(raw),
        tokens_consumed=int(tau),
        stopped_by=_STOP_NAMES[int(reason)],
    )


def fit_minmax(raw_scores) -> NormStats:
    """Training-split extrema used for min-max normalization."""
    values = list(raw_scores)
    if not values:
        raise ValueError("cannot fit normalization on an empty score list")
    return NormStats(min=float(min(values)), max=float(max(values)))


def normalize(raw: float, stats: NormStats) -> float:
    """Map a raw score into [0, 1], clamping out-of-range test-time values."""
    if stats.min == stats.max:
        return 0.5
    value = (raw - stats.min) / (stats.max - stats.min)
    return min(max(value, 0.0), 1.0)


def scored_to_dict(seq: ScoredSequence) -> dict:
    return {
        "id": seq.record_id,
        "tau": seq.tau,
        "raw_score": seq.raw_score,
        "norm_score": seq.norm_score,
        "tokens_consumed": seq.tokens_consumed,
        "stopped_by": seq.stopped_by,
    }


def write_scored(path, sequences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps(scored_to_dict(seq)))
            fh.write("\n")


def read_scored(path) -> List[ScoredSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                ScoredSequence(
                    record_id=obj["id"],
                    tau=int(obj["tau"]),
                    raw_score=float(obj["raw_score"]),
                    tokens_consumed=int(obj["tokens_consumed"]),
                    stopped_by=obj["stopped_by"],
                    norm_score=None if obj.get("norm_score") is None else float(obj["norm_score"]),
                )
            )
    return out


def norm_stats_to_dict(stats: NormStats) -> dict:
    return {"min": stats.min, "max": stats.max}


def norm_stats_from_dict(obj) -> NormStats:
    return NormStats(min=float(obj["min"]), max=float(obj["max"]))
