"""Construct tiny randomly-initialized checkpoints for offline smoke testing.

The sandbox-friendly substitute for downloading small hub checkpoints: a
WordPiece vocabulary is derived from a text corpus and every capability gets
a two-layer transformer with hidden size 32. The checkpoints satisfy the
wire contract (schemas, offsets, conventions) and are good enough to overfit
the separable fine-tuning fixtures; they know nothing about the world.
"""

from __future__ import annotations

import re
from pathlib import Path

import torch
from transformers import (
    BertConfig,
    BertForMaskedLM,
    BertForQuestionAnswering,
    BertForSequenceClassification,
    BertForTokenClassification,
    BertTokenizerFast,
    EncoderDecoderConfig,
    EncoderDecoderModel,
)

from model_server.engines import OBJECT_TOKEN, SUBJECT_TOKEN, TRIPLET_TOKEN

SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
TAG_TOKENS = [TRIPLET_TOKEN, SUBJECT_TOKEN, OBJECT_TOKEN]

ENTAILMENT_LABELS = {0: "ENTAILMENT", 1: "NEUTRAL", 2: "CONTRADICTION"}
NER_LABELS = {0: "O", 1: "B-PER", 2: "I-PER", 3: "B-LOC", 4: "I-LOC", 5: "B-ORG", 6: "I-ORG"}


def build_tokenizer(corpus_texts: list[str], out_dir: Path) -> BertTokenizerFast:
    """Whole-word WordPiece vocabulary over the lowercased corpus."""
    words: list[str] = []
    seen = set()
    for text in corpus_texts:
        for word in re.findall(r"\w+|[^\w\s]", text.lower()):
            if word not in seen:
                seen.add(word)
                words.append(word)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab_path = out_dir / "vocab.txt"
    vocab_path.write_text(
        "\n".join(SPECIAL_TOKENS + TAG_TOKENS + sorted(words)) + "\n", encoding="utf-8"
    )
    tokenizer = BertTokenizerFast.from_pretrained(str(out_dir))
    tokenizer.add_special_tokens({"additional_special_tokens": TAG_TOKENS})
    return tokenizer


def _tiny_config(vocab_size: int, **overrides) -> BertConfig:
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=256,
        **overrides,
    )


def build_tiny_checkpoints(
    out_dir: str | Path, corpus_texts: list[str], seed: int = 0
) -> dict[str, str]:
    """Create one checkpoint per capability under out_dir; returns their paths."""
    torch.manual_seed(seed)
    out = Path(out_dir)
    tokenizer = build_tokenizer(corpus_texts, out / "tokenizer")
    vocab_size = len(tokenizer)
    paths: dict[str, str] = {}

    def save(capability: str, model) -> None:
        target = out / capability
        model.save_pretrained(target)
        tokenizer.save_pretrained(target)
        paths[capability] = str(target)

    save("mask_fill", BertForMaskedLM(_tiny_config(vocab_size)))
    save(
        "entailment",
        BertForSequenceClassification(
            _tiny_config(
                vocab_size,
                num_labels=3,
                id2label=ENTAILMENT_LABELS,
                label2id={v: k for k, v in ENTAILMENT_LABELS.items()},
            )
        ),
    )
    save(
        "ner",
        BertForTokenClassification(
            _tiny_config(
                vocab_size,
                num_labels=len(NER_LABELS),
                id2label=NER_LABELS,
                label2id={v: k for k, v in NER_LABELS.items()},
            )
        ),
    )
    save("qa", BertForQuestionAnswering(_tiny_config(vocab_size)))

    e2d_config = EncoderDecoderConfig.from_encoder_decoder_configs(
        _tiny_config(vocab_size),
        _tiny_config(vocab_size, is_decoder=True, add_cross_attention=True),
    )
    relext = EncoderDecoderModel(e2d_config)
    relext.config.decoder_start_token_id = tokenizer.cls_token_id
    relext.config.pad_token_id = tokenizer.pad_token_id
    relext.generation_config.decoder_start_token_id = tokenizer.cls_token_id
    relext.generation_config.pad_token_id = tokenizer.pad_token_id
    save("relext", relext)
    return paths
