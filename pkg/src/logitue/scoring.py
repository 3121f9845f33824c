"""Per-token uncertainty signals computed from a step's top-K logits."""

from __future__ import annotations

import numpy as np

FORMULA_L2 = "l2"
FORMULA_RELU_SUM = "relu_sum"


def _as_finite_array(topk_logits) -> np.ndarray:
    arr = np.asarray(topk_logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("topk_logits must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("topk_logits contains non-finite values")
    return arr


def logit_magnitude(topk_logits, formula: str = FORMULA_L2) -> float:
    """Positive-evidence magnitude of the top-K logits.

    Default is the L2 norm of the ReLU'd logits, sqrt(sum(max(l, 0)^2));
    the ReLU-sum variant is available for sensitivity checks.
    """
    arr = _as_finite_array(topk_logits)
    relu = np.maximum(arr, 0.0)
    if formula == FORMULA_L2:
        return float(np.sqrt(np.dot(relu, relu)))
    if formula == FORMULA_RELU_SUM:
        return float(np.sum(relu))
    raise ValueError(f"unknown formula {formula!r}")


def _log_softmax(arr: np.ndarray) -> np.ndarray:
    shifted = arr - arr.max()
    return shifted - np.log(np.sum(np.exp(shifted)))


def token_entropy(topk_logits) -> float:
    """Shannon entropy (nats) of the softmax restricted to the top-K entries."""
    arr = _as_finite_array(topk_logits)
    logp = _log_softmax(arr)
    p = np.exp(logp)
    return float(-np.sum(np.where(p > 0.0, p * logp, 0.0)))


def token_self_certainty(topk_logits) -> float:
    """KL divergence of the top-K softmax from the uniform distribution, in nats."""
    arr = _as_finite_array(topk_logits)
    logp = _log_softmax(arr)
    p = np.exp(logp)
    log_k = np.log(arr.size)
    return float(np.sum(np.where(p > 0.0, p * (logp + log_k), 0.0)))


SCORERS = {
    "logit_magnitude": logit_magnitude,
    "entropy": token_entropy,
    "self_certainty": token_self_certainty,
}


def get_scorer(name: str, formula: str = FORMULA_L2):
    """Resolve a scorer name to a callable over one step's top-K logits."""
    if name == "logit_magnitude":
        return lambda logits: logit_magnitude(logits, formula=formula)
    try:
        return SCORERS[name]
    except KeyError:
        raise ValueError(f"unknown scorer {name!r}") from None


def score_stream(record, scorer) -> np.ndarray:
    """Score every step of a record, returning a float64 array of length T."""
    if isinstance(scorer, str):
        scorer = get_scorer(scorer)
    out = np.empty(record.num_steps, dtype=np.float64)
    for i, step in enumerate(record.steps):
        try:
            out[i] = scorer(step.topk_logits)
        except ValueError as exc:
            raise ValueError(f"step {i + 1} of record {record.id!r}: {exc}") from exc
    return out
