import json

import pytest
import torch


WORDS = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran", "fast", "blue",
         "sky", "is", "green", "tree", "bird", "fish", "swims", "deep", "water",
         "runs", "red", "sun", "moon", "star", "bright", "dark", "night", "day",
         "warm", "cold", "wind", "rain", "snow", "hill", "stone", "river",
         "cloud", "grass", "leaf", "root"]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A tiny randomly-initialized causal LM plus a word-level tokenizer,
    saved locally so tests never download anything."""
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    out = tmp_path_factory.mktemp("tiny_model")
    vocab = {"<unk>": 0, "<eos>": 1, "<pad>": 2}
    for word in WORDS:
        vocab[word] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="<unk>",
                                   eos_token="<eos>", pad_token="<pad>")
    fast.save_pretrained(out)

    torch.manual_seed(0)
    config = GPT2Config(vocab_size=len(vocab), n_positions=256, n_embd=32,
                        n_layer=2, n_head=2, eos_token_id=1, pad_token_id=2)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def prompt_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("prompts") / "prompts.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(20):
            words = [WORDS[(i + j) % len(WORDS)] for j in range(4)]
            fh.write(json.dumps({"id": f"p{i:02d}", "prompt": " ".join(words)}))
            fh.write("\n")
    return path
