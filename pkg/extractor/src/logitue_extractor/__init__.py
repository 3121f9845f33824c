"""Adapter that runs real models and emits the uncertainty toolkit's JSONL
formats: per-step top-K generation logits and frozen-encoder embeddings."""

__version__ = "0.1.0"
