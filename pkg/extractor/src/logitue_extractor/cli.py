"""Command-line entry points: extract-generations and extract-embeddings.

Each run writes its outputs plus an extraction_config.json sidecar that
records the resolved configuration (including the prompt template), so
output files themselves stay pure JSONL record streams.
"""

import argparse
import json
import sys
from pathlib import Path

from . import embeddings as emb
from . import generations as gen
from .prompts import PromptFormatError, read_prompts

EXIT_OK = 0
EXIT_INPUT_ERROR = 2


def _write_sidecar(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "extraction_config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main_generations(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-generations",
        description="Sample generations and record raw per-step top-K logits",
    )
    parser.add_argument("--model", required=True)
    parser.add_argument("--prompts", required=True, help="JSONL of {id, prompt, reference?}")
    parser.add_argument("--output-dir", required=True)
    parser.add_argument("--temperature", type=float, default=1.0)
    parser.add_argument("--top-k", dest="top_k", type=int, default=20)
    parser.add_argument("--top-p", dest="top_p", type=float, default=1.0)
    parser.add_argument("--max-new-tokens", dest="max_new_tokens", type=int, default=64)
    parser.add_argument("--prompt-template", dest="prompt_template",
                        default=gen.DEFAULT_TEMPLATE,
                        help="must contain '{prompt}'")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        config = gen.ExtractionConfig(
            model=args.model, temperature=args.temperature, top_k=args.top_k,
            top_p=args.top_p, max_new_tokens=args.max_new_tokens,
            prompt_template=args.prompt_template, device=args.device,
            seed=args.seed,
        )
        prompts = read_prompts(args.prompts)
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records = gen.extract_generations(prompts, config)
        gen.write_records(out_dir / "generations.jsonl", records)
        _write_sidecar(out_dir, {"command": "extract-generations",
                                 "config": config.to_dict()})
    except (PromptFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def main_embeddings(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-embeddings",
        description="Mean-pooled frozen-encoder embeddings for prompts",
    )
    parser.add_argument("--encoder", required=True)
    parser.add_argument("--prompts", required=True, help="JSONL of {id, prompt, ...}")
    parser.add_argument("--output-dir", required=True)
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    try:
        prompts = read_prompts(args.prompts)
        model, tokenizer = emb.load_encoder(args.encoder, args.device)
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        pairs = emb.extract_embeddings(prompts, model, tokenizer,
                                       batch_size=args.batch_size,
                                       device=args.device)
        emb.write_embeddings(out_dir / "embeddings.jsonl", pairs)
        _write_sidecar(out_dir, {"command": "extract-embeddings",
                                 "config": {"encoder": args.encoder,
                                            "batch_size": args.batch_size,
                                            "device": args.device}})
    except (PromptFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK
