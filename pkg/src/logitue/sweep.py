"""Configuration sweeps: the M x W patience grid and fixed-fraction curves.

Token scores are computed once per record and cached; every grid cell
reuses the cache through the batch kernel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .aggregator import (MODE_EARLY_STOP, MODE_FRACTION, StoppingConfig, run_scores)
from .metrics import auroc
from .scoring import get_scorer, score_stream

DEFAULT_GRID = (1, 3, 5, 10, 20, 50, 100)
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 11))


@dataclass
class SweepSpec:
    m_grid: tuple = DEFAULT_GRID
    w_grid: tuple = DEFAULT_GRID
    fraction_grid: tuple = DEFAULT_FRACTIONS

    def __post_init__(self):
        if not self.m_grid or not self.w_grid or not self.fraction_grid:
            raise ValueError("sweep grids must be non-empty")
        if min(self.m_grid) < 1 or min(self.w_grid) < 1:
            raise ValueError("M and W grids must be positive")
        if min(self.fraction_grid) <= 0 or max(self.fraction_grid) > 1:
            raise ValueError("fractions must lie in (0, 1]")


@dataclass
class SweepCell:
    M: int
    W: int
    auroc: float
    mean_tau_over_T: float


@dataclass
class FractionCell:
    fraction: float
    M: int
    auroc: float


@dataclass
class ScoreCache:
    ids: List[str]
    scores: List[np.ndarray]
    eos_flags: List[bool]
    correct: np.ndarray

    @classmethod
    def build(cls, records, correct_by_id: Dict[str, int], scorer="logit_magnitude"):
        if isinstance(scorer, str):
            scorer = get_scorer(scorer)
        ids, scores, eos_flags, correct = [], [], [], []
        for record in records:
            if record.id not in correct_by_id:
                raise KeyError(f"no correctness label for record {record.id!r}")
            ids.append(record.id)
            scores.append(score_stream(record, scorer))
            eos_flags.append(record.steps[-1].is_eos)
            correct.append(correct_by_id[record.id])
        if not ids:
            raise ValueError("sweep needs at least one record")
        return cls(ids=ids, scores=scores, eos_flags=eos_flags,
                   correct=np.asarray(correct, dtype=np.int64))


def _cell_scores(cache: ScoreCache, config: StoppingConfig):
    raws = np.empty(len(cache.ids))
    ratios = np.empty(len(cache.ids))
    for i, (rid, scores, eos) in enumerate(zip(cache.ids, cache.scores, cache.eos_flags)):
        seq = run_scores(rid, scores, config, eos)
        raws[i] = seq.raw_score
        ratios[i] = seq.tau / scores.shape[0]
    return raws, ratios


def run_mw_sweep(records, correct_by_id, spec: SweepSpec,
                 scorer="logit_magnitude") -> List[SweepCell]:
    cache = ScoreCache.build(records, correct_by_id, scorer)
    cells = []
    for m in spec.m_grid:
        for w in spec.w_grid:
            config = StoppingConfig(M=m, W=w, mode=MODE_EARLY_STOP)
            raws, ratios = _cell_scores(cache, config)
            cells.append(SweepCell(M=m, W=w, auroc=auroc(raws, cache.correct),
                                   mean_tau_over_T=float(np.mean(ratios))))
    return cells


def run_fraction_sweep(records, correct_by_id, spec: SweepSpec,
                       scorer="logit_magnitude") -> List[FractionCell]:
    cache = ScoreCache.build(records, correct_by_id, scorer)
    cells = []
    for fraction in spec.fraction_grid:
        for m in spec.m_grid:
            config = StoppingConfig(M=m, mode=MODE_FRACTION, fraction=fraction)
            raws, _ = _cell_scores(cache, config)
            cells.append(FractionCell(fraction=fraction, M=m,
                                      auroc=auroc(raws, cache.correct)))
    return cells


def write_mw_csv(path, cells: List[SweepCell]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["M", "W", "auroc", "mean_tau_ratio"])
        for c in cells:
            writer.writerow([c.M, c.W, repr(c.auroc), repr(c.mean_tau_over_T)])


def write_fraction_csv(path, cells: List[FractionCell]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fraction", "M", "auroc"])
        for c in cells:
            writer.writerow([repr(c.fraction), c.M, repr(c.auroc)])
