"""Frozen-encoder embedding extraction with masked mean pooling.

Writes the embeddings JSONL schema ({id, vector}) consumed by the
uncertainty toolkit's meta-model trainer. Batches back off on
out-of-memory errors before giving up.
"""

import json
from typing import List

import torch

from .prompts import Prompt


def load_encoder(model_name: str, device: str = "cpu"):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.to(device)
    model.eval()
    return model, tokenizer


def _is_oom(exc: RuntimeError) -> bool:
    return "out of memory" in str(exc).lower()


@torch.no_grad()
def _encode_batch(texts: List[str], model, tokenizer, device: str):
    enc = tokenizer(texts, return_tensors="pt", padding=True, truncation=True)
    enc = {k: v.to(device) for k, v in enc.items()}
    hidden = model(**enc).last_hidden_state
    mask = enc["attention_mask"].unsqueeze(-1).float()
    pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
    return pooled.float().cpu()


def extract_embeddings(prompts: List[Prompt], model, tokenizer,
                       batch_size: int = 8, device: str = "cpu"):
    """(id, vector) pairs; halves the batch size on OOM, errors at size 1."""
    out = []
    i = 0
    while i < len(prompts):
        size = min(batch_size, len(prompts) - i)
        while True:
            batch = prompts[i:i + size]
            try:
                pooled = _encode_batch([p.prompt for p in batch], model,
                                       tokenizer, device)
                break
            except RuntimeError as exc:
                if not _is_oom(exc) or size == 1:
                    raise
                size = max(1, size // 2)
        for prompt, vec in zip(batch, pooled):
            out.append((prompt.id, [float(v) for v in vec]))
        i += size
    dims = {len(v) for _, v in out}
    if len(dims) > 1:
        raise ValueError(f"embedding dimension drift within one run: {sorted(dims)}")
    return out


def write_embeddings(path, pairs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, vec in pairs:
            fh.write(json.dumps({"id": rid, "vector": vec}))
            fh.write("\n")
