"""Sampled generation with raw per-step top-K logit capture.

At every decode step the K largest entries of the raw (pre-softmax,
pre-temperature, pre-filtering) logit vector are recorded; temperature,
top-k, and top-p only shape which token is drawn afterwards. Emitted
records follow the GenerationRecord JSONL schema consumed by the
uncertainty toolkit.
"""

import json
import zlib
from dataclasses import dataclass, asdict
from typing import Iterator, List, Optional

import torch

from .prompts import Prompt

DEFAULT_TEMPLATE = "{prompt}"


@dataclass
class ExtractionConfig:
    model: str
    temperature: float = 1.0
    top_k: int = 20
    top_p: float = 1.0
    max_new_tokens: int = 64
    prompt_template: str = DEFAULT_TEMPLATE
    batch_size: int = 8
    device: str = "cpu"
    seed: Optional[int] = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if "{prompt}" not in self.prompt_template:
            raise ValueError("prompt_template must contain '{prompt}'")

    def to_dict(self) -> dict:
        return asdict(self)


def load_generator(config: ExtractionConfig):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModelForCausalLM.from_pretrained(config.model)
    model.to(config.device)
    model.eval()
    return model, tokenizer


def _sample_token(logits: torch.Tensor, config: ExtractionConfig,
                  generator: torch.Generator) -> int:
    """Temperature / top-k / top-p sampling from one raw logit vector."""
    scaled = logits / config.temperature
    if config.top_k < scaled.shape[-1]:
        kth = torch.topk(scaled, config.top_k).values[-1]
        scaled = scaled.masked_fill(scaled < kth, float("-inf"))
    if config.top_p < 1.0:
        sorted_logits, sorted_idx = torch.sort(scaled, descending=True)
        cum = torch.cumsum(torch.softmax(sorted_logits, dim=-1), dim=-1)
        cut = cum - torch.softmax(sorted_logits, dim=-1) >= config.top_p
        sorted_logits = sorted_logits.masked_fill(cut, float("-inf"))
        scaled = torch.full_like(scaled, float("-inf")).scatter(
            -1, sorted_idx, sorted_logits)
    probs = torch.softmax(scaled, dim=-1)
    return int(torch.multinomial(probs, 1, generator=generator).item())


@torch.no_grad()
def generate_record(prompt: Prompt, model, tokenizer,
                    config: ExtractionConfig) -> dict:
    """One sampled generation with per-step raw top-K capture."""
    text = config.prompt_template.format(prompt=prompt.prompt)
    input_ids = tokenizer(text, return_tensors="pt").input_ids.to(config.device)
    eos_id = tokenizer.eos_token_id

    generator = torch.Generator(device=config.device)
    if config.seed is not None:
        # stable per-record stream: process-independent hash of seed and id
        # (kept in the low 32 bits, which is all the RNG seeding uses)
        generator.manual_seed(
            zlib.crc32(f"{int(config.seed)}:{prompt.id}".encode("utf-8")))
    else:
        generator.seed()

    steps: List[dict] = []
    generated: List[int] = []
    ids = input_ids
    for _ in range(config.max_new_tokens):
        logits = model(ids).logits[0, -1, :].float()
        k = min(config.top_k, logits.shape[-1])
        top = torch.topk(logits, k)
        token_id = _sample_token(logits, config, generator)
        is_eos = eos_id is not None and token_id == eos_id
        steps.append({
            "token_id": token_id,
            "token_text": tokenizer.decode([token_id]),
            "topk_logits": [float(v) for v in top.values],
            "topk_token_ids": [int(i) for i in top.indices],
            "is_eos": bool(is_eos),
        })
        generated.append(token_id)
        if is_eos:
            break
        ids = torch.cat([ids, torch.tensor([[token_id]], device=config.device)], dim=1)

    record = {
        "id": prompt.id,
        "prompt": prompt.prompt,
        "answer_text": tokenizer.decode(generated, skip_special_tokens=True),
        "steps": steps,
    }
    if prompt.reference is not None:
        record["reference"] = prompt.reference
    return record


def extract_generations(prompts, config: ExtractionConfig,
                        model=None, tokenizer=None) -> Iterator[dict]:
    if model is None or tokenizer is None:
        model, tokenizer = load_generator(config)
    for prompt in prompts:
        yield generate_record(prompt, model, tokenizer, config)


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record))
            fh.write("\n")
