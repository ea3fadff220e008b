"""Offline demo artifacts: a self-contained vocabulary and seeded random-weight models.

The demo exists so the protocol surface can be served and exercised without
downloading pretrained weights; its predictions are deterministic but
arbitrary. Full a-z piece coverage guarantees every lowercase word tokenizes
into word pieces instead of [UNK], which keeps alignment groups interesting.
"""

from __future__ import annotations

import os
import string
import tempfile

import torch
from transformers import (
    BertConfig,
    BertForSequenceClassification,
    BertTokenizer,
    GPT2Config,
    GPT2LMHeadModel,
)

from .served import ServedModel

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

# whole words kept as single pieces; everything else decomposes into sub-words
WORDS = [
    "the", "a", "an", "and", "with", "of", "but", "this", "it", "is", "was",
    "movie", "film", "picture", "flick", "feature",
    "story", "plot", "tale", "script",
    "cast", "actors", "players",
    "charm", "delight", "wit", "grace",
    "mess", "bore", "chore", "slog",
    "good", "great", "fine", "lovely", "superb",
    "bad", "awful", "dull", "bleak", "dreary",
    "long", "short", "quiet", "loud",
    "feels", "seems", "looks", "plays",
    "truly", "really", "quite", "rather", "fairly", "mostly",
]

SUFFIX_PIECES = ["##s", "##ing", "##ed", "##ly", "##er", "##est"]


def demo_vocab() -> list[str]:
    vocab: list[str] = []
    seen = set()
    for entry in (
        SPECIALS
        + list(string.ascii_lowercase)
        + ["##" + c for c in string.ascii_lowercase]
        + list(string.digits)
        + list(".,!?;:'\"()-")
        + WORDS
        + SUFFIX_PIECES
    ):
        if entry not in seen:
            seen.add(entry)
            vocab.append(entry)
    return vocab


def write_demo_vocab(path) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(demo_vocab()) + "\n")
    return str(path)


def build_demo_tokenizer() -> BertTokenizer:
    with tempfile.TemporaryDirectory() as tmp:
        vocab_path = os.path.join(tmp, "vocab.txt")
        write_demo_vocab(vocab_path)
        return BertTokenizer(vocab_path, do_lower_case=True)


def build_demo_model(
    labels: int = 2,
    seed: int = 0,
    with_sentence_sim: bool = True,
    with_language_model: bool = True,
    ig_steps_cap: int = 512,
) -> ServedModel:
    tokenizer = build_demo_tokenizer()
    config = BertConfig(
        vocab_size=len(tokenizer),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=128,
        num_labels=labels,
        attn_implementation="eager",
    )
    torch.manual_seed(seed)
    classifier = BertForSequenceClassification(config)
    language_model = None
    if with_language_model:
        lm_config = GPT2Config(
            vocab_size=len(tokenizer),
            n_embd=32,
            n_layer=2,
            n_head=2,
            n_positions=128,
            bos_token_id=tokenizer.cls_token_id,
            eos_token_id=tokenizer.sep_token_id,
        )
        torch.manual_seed(seed + 1)
        language_model = GPT2LMHeadModel(lm_config)
    return ServedModel(
        classifier,
        tokenizer,
        ig_steps_cap=ig_steps_cap,
        sentence_sim=with_sentence_sim,
        language_model=language_model,
    )


def load_model_dir(
    path: str,
    with_sentence_sim: bool = True,
    ig_steps_cap: int = 512,
    device: str = "cpu",
) -> ServedModel:
    """Serve a fine-tuned classifier directory (config + weights + tokenizer)."""
    classifier = BertForSequenceClassification.from_pretrained(
        path, attn_implementation="eager"
    )
    tokenizer = BertTokenizer.from_pretrained(path)
    return ServedModel(
        classifier,
        tokenizer,
        ig_steps_cap=ig_steps_cap,
        sentence_sim=with_sentence_sim,
        language_model=None,
        device=device,
    )
