"""JSONL logit-stream data model: token steps, generation records, split IO.

One record per line, UTF-8, keys exactly:
``id``, ``prompt``, ``answer_text``, ``reference`` (optional), ``steps`` =
array of ``{token_id, token_text, topk_logits, topk_token_ids, is_eos}``.
Ingestion preserves file order and never transforms logit values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional


class StreamFormatError(ValueError):
    """Malformed record: carries the offending line number and record id when known."""

    def __init__(self, message, line_number=None, record_id=None):
        loc = []
        if record_id is not None:
            loc.append(f"record {record_id!r}")
        if line_number is not None:
            loc.append(f"line {line_number}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line_number = line_number
        self.record_id = record_id


@dataclass
class TokenStep:
    token_id: int
    token_text: str
    topk_logits: List[float]
    topk_token_ids: List[int]
    is_eos: bool = False


@dataclass
class GenerationRecord:
    id: str
    prompt: str
    answer_text: str
    steps: List[TokenStep]
    reference: Optional[str] = None

    @property
    def num_steps(self) -> int:
        return len(self.steps)


def _require(obj, key, line_number, record_id):
    if key not in obj:
        raise StreamFormatError(f"missing required field {key!r}", line_number, record_id)
    return obj[key]


def _validate_step(step_obj, index, line_number, record_id, n_steps):
    if not isinstance(step_obj, dict):
        raise StreamFormatError(f"step {index} is not an object", line_number, record_id)
    token_id = _require(step_obj, "token_id", line_number, record_id)
    token_text = _require(step_obj, "token_text", line_number, record_id)
    logits = _require(step_obj, "topk_logits", line_number, record_id)
    token_ids = _require(step_obj, "topk_token_ids", line_number, record_id)
    is_eos = bool(step_obj.get("is_eos", False))
    if not isinstance(logits, list) or not isinstance(token_ids, list):
        raise StreamFormatError(f"step {index}: topk arrays must be lists", line_number, record_id)
    if len(logits) != len(token_ids):
        raise StreamFormatError(
            f"step {index}: topk_logits has {len(logits)} entries but "
            f"topk_token_ids has {len(token_ids)}",
            line_number,
            record_id,
        )
    if len(logits) < 1:
        raise StreamFormatError(f"step {index}: empty topk arrays", line_number, record_id)
    values = []
    for v in logits:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise StreamFormatError(
                f"step {index}: non-finite or non-numeric logit {v!r}", line_number, record_id
            )
        values.append(float(v))
    if is_eos and index != n_steps - 1:
        raise StreamFormatError(
            f"step {index}: is_eos set on a non-final step", line_number, record_id
        )
    return TokenStep(
        token_id=int(token_id),
        token_text=str(token_text),
        topk_logits=values,
        topk_token_ids=[int(t) for t in token_ids],
        is_eos=is_eos,
    )


def parse_record(line: str, line_number: Optional[int] = None) -> GenerationRecord:
    """Parse and fully validate one JSONL line into a GenerationRecord."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(f"malformed JSON: {exc}", line_number) from exc
    if not isinstance(obj, dict):
        raise StreamFormatError("record is not a JSON object", line_number)
    record_id = obj.get("id")
    rid = _require(obj, "id", line_number, record_id)
    prompt = _require(obj, "prompt", line_number, record_id)
    answer_text = _require(obj, "answer_text", line_number, record_id)
    steps_obj = _require(obj, "steps", line_number, record_id)
    if not isinstance(steps_obj, list) or len(steps_obj) == 0:
        raise StreamFormatError("steps must be a non-empty list", line_number, record_id)
    steps = [
        _validate_step(s, i, line_number, record_id, len(steps_obj))
        for i, s in enumerate(steps_obj)
    ]
    reference = obj.get("reference")
    if reference is not None:
        reference = str(reference)
    return GenerationRecord(
        id=str(rid),
        prompt=str(prompt),
        answer_text=str(answer_text),
        steps=steps,
        reference=reference,
    )


def record_to_dict(record: GenerationRecord) -> dict:
    obj = {
        "id": record.id,
        "prompt": record.prompt,
        "answer_text": record.answer_text,
    }
    if record.reference is not None:
        obj["reference"] = record.reference
    obj["steps"] = [
        {
            "token_id": s.token_id,
            "token_text": s.token_text,
            "topk_logits": s.topk_logits,
            "topk_token_ids": s.topk_token_ids,
            "is_eos": s.is_eos,
        }
        for s in record.steps
    ]
    return obj


def record_to_line(record: GenerationRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False)


def iter_records(path) -> Iterator[GenerationRecord]:
    """Yield records in file order; raises on the first duplicate id."""
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = parse_record(line, line_number=line_number)
            if record.id in seen:
                raise StreamFormatError("duplicate id", line_number, record.id)
            seen.add(record.id)
            yield record


def read_split(path) -> List[GenerationRecord]:
    return list(iter_records(path))


def write_split(path, records: Iterable[GenerationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_line(record))
            fh.write("\n")
