"""Seeded synthetic corpus generator.

Two populations: reliable records whose reference matches the generated
answer and whose logits sit at a low baseline, and unreliable records with
mismatched references and logits shifted upward by the separation
parameter. By construction the positive-logit magnitude is the optimal
ranking signal, so separation directly controls downstream AUROC.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .streams import GenerationRecord, TokenStep

_WORDS = (
    "river", "engine", "violet", "copper", "meadow", "signal", "harbor",
    "timber", "quartz", "sparrow", "lantern", "orchid", "basalt", "willow",
)


@dataclass
class SyntheticSpec:
    n: int = 2000
    k: int = 20
    t_min: int = 5
    t_max: int = 60
    separation: float = 2.0
    base_logit: float = 1.0
    noise: float = 1.0
    embed_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if not (1 <= self.t_min <= self.t_max):
            raise ValueError("need 1 <= t_min <= t_max")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")


def _answer_words(rng: np.random.Generator, count: int) -> str:
    return " ".join(_WORDS[i] for i in rng.integers(0, len(_WORDS), size=count))


def generate_corpus(spec: SyntheticSpec) -> Tuple[List[GenerationRecord], Optional[dict]]:
    """Build records (and per-id embeddings when embed_dim > 0)."""
    rng = np.random.default_rng(spec.seed)
    records = []
    embeddings = {} if spec.embed_dim > 0 else None
    for i in range(spec.n):
        unreliable = i % 2 == 1
        rid = f"syn-{i:06d}"
        T = int(rng.integers(spec.t_min, spec.t_max + 1))
        mu = spec.base_logit + (spec.separation if unreliable else 0.0)
        logits = mu + spec.noise * rng.standard_normal((T, spec.k))
        token_ids = rng.integers(0, 50_000, size=(T, spec.k))
        answer = _answer_words(rng, 4)
        if unreliable:
            # Digits never appear in the word bank, so ROUGE-L is 0.
            reference = f"ref{i} mismatch{i}"
        else:
            reference = answer
        steps = [
            TokenStep(
                token_id=int(token_ids[t, 0]),
                token_text=f"tok{t}",
                topk_logits=[float(v) for v in logits[t]],
                topk_token_ids=[int(v) for v in token_ids[t]],
                is_eos=(t == T - 1),
            )
            for t in range(T)
        ]
        records.append(
            GenerationRecord(
                id=rid,
                prompt=f"synthetic question {i} about {_WORDS[i % len(_WORDS)]}",
                answer_text=answer,
                steps=steps,
                reference=reference,
            )
        )
        if embeddings is not None:
            center = 2.0 if unreliable else -2.0
            direction = np.ones(spec.embed_dim) / np.sqrt(spec.embed_dim)
            embeddings[rid] = center * direction + rng.standard_normal(spec.embed_dim)
    return records, embeddings


def split_records(records: List[GenerationRecord], fractions=(0.8, 0.1, 0.1)):
    """Deterministic contiguous train/val/test split (records are already
    population-interleaved, so contiguous slices stay balanced)."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be three values summing to 1")
    n = len(records)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    train = records[:n_train]
    val = records[n_train:n_train + n_val]
    test = records[n_train + n_val:]
    return train, val, test
