"""ROUGE-L correctness labeling with a strict decision threshold.

Tokenization contract: lowercase, split on Unicode whitespace, strip
leading/trailing ASCII punctuation from each token, drop empties.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from typing import List

import numpy as np

from . import _kernels


class MissingReferenceError(ValueError):
    """Raised when correctness labeling is requested for an unlabeled record."""


@dataclass
class LabeledRecord:
    record_id: str
    rouge_l: float
    correct: int

    @property
    def unreliable(self) -> int:
        return 1 - self.correct


def tokenize(text: str) -> List[str]:
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(string.punctuation)
        if tok:
            tokens.append(tok)
    return tokens


def lcs_length(a: List[str], b: List[str]) -> int:
    """Longest-common-subsequence length between two token lists."""
    if not a or not b:
        return 0
    vocab = {}
    for tok in a:
        vocab.setdefault(tok, len(vocab))
    for tok in b:
        vocab.setdefault(tok, len(vocab))
    a_ids = np.array([vocab[t] for t in a], dtype=np.int64)
    b_ids = np.array([vocab[t] for t in b], dtype=np.int64)
    return int(_kernels.lcs_length_ids(a_ids, b_ids))


def rouge_l(candidate: str, reference: str, beta: float = 1.0) -> float:
    """ROUGE-L F-measure between a candidate and a reference string.

    F1 by default; beta weights recall for sensitivity studies.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return ((1 + beta**2) * precision * recall) / (recall + beta**2 * precision)


def label(record, threshold: float = 0.3, beta: float = 1.0) -> LabeledRecord:
    """Binary correctness: ROUGE-L strictly above the threshold."""
    if record.reference is None:
        raise MissingReferenceError(f"record {record.id!r} has no reference answer")
    score = rouge_l(record.answer_text, record.reference, beta=beta)
    return LabeledRecord(record_id=record.id, rouge_l=score, correct=int(score > threshold))


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(json.dumps({"id": lab.record_id, "rouge_l": lab.rouge_l, "correct": lab.correct}))
            fh.write("\n")


def read_labels(path) -> List[LabeledRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                LabeledRecord(
                    record_id=obj["id"],
                    rouge_l=float(obj["rouge_l"]),
                    correct=int(obj["correct"]),
                )
            )
    return out
