"""Prompt-file ingestion: JSONL lines of {id, prompt, reference?}."""

import json
from dataclasses import dataclass
from typing import List, Optional


class PromptFormatError(Exception):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass
class Prompt:
    id: str
    prompt: str
    reference: Optional[str] = None


def read_prompts(path) -> List[Prompt]:
    prompts = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PromptFormatError(f"malformed JSON: {exc}", line_number) from exc
            if not isinstance(obj, dict):
                raise PromptFormatError("prompt line must be a JSON object", line_number)
            for key in ("id", "prompt"):
                if key not in obj:
                    raise PromptFormatError(f"missing required key {key!r}", line_number)
            rid = str(obj["id"])
            if rid in seen:
                raise PromptFormatError(f"duplicate prompt id {rid!r}", line_number)
            seen.add(rid)
            reference = obj.get("reference")
            prompts.append(Prompt(id=rid, prompt=str(obj["prompt"]),
                                  reference=None if reference is None else str(reference)))
    if not prompts:
        raise PromptFormatError(f"no prompts found in {path}")
    return prompts
