import numpy as np
import pytest

from logitue.streams import GenerationRecord, TokenStep


def make_record(token_scores, rid="r0", eos_last=False, prompt="p", answer="a",
                reference=None):
    """Record whose single-logit steps reproduce the given token scores
    under the logit-magnitude scorer (scores must be >= 0) or under a
    first-element scorer."""
    steps = []
    n = len(token_scores)
    for i, s in enumerate(token_scores):
        steps.append(
            TokenStep(
                token_id=i,
                token_text=f"tok{i}",
                topk_logits=[float(s)],
                topk_token_ids=[i],
                is_eos=(eos_last and i == n - 1),
            )
        )
    return GenerationRecord(id=rid, prompt=prompt, answer_text=answer,
                            steps=steps, reference=reference)


def first_logit(topk_logits):
    return float(topk_logits[0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
