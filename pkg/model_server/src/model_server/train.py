"""Fine-tuning routines consuming the toolkit's generated JSONL datasets.

Defaults follow the documented training setup per task: masked-LM tuning for
10 epochs at lr 5e-6 with batch size 32 selecting the checkpoint with the
lowest dev loss; entailment classification for 3 epochs at lr 2e-5, max
sequence length 128, batch size 8 with 4 gradient-accumulation steps (an
Adafactor switch is available for large models); extractive QA for 2 epochs
at lr 3e-5, max sequence length 384, batch size 12. Everything is
overridable so desk-scale smoke runs stay cheap. Input files are validated
before any training starts; a malformed line aborts with its line number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForQuestionAnswering,
    AutoModelForSequenceClassification,
    AutoTokenizer,
    EncoderDecoderModel,
)

from model_server.engines import OBJECT_TOKEN, SUBJECT_TOKEN, TRIPLET_TOKEN


class TrainingDataError(ValueError):
    """The input file does not match the expected JSONL schema."""


def _load_jsonl(path: str | Path, required: set[str]) -> list[dict]:
    rows = []
    p = Path(path)
    if not p.exists():
        raise TrainingDataError(f"training file not found: {p}")
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrainingDataError(f"{p}:{lineno}: invalid JSON: {exc}") from exc
            missing = required - set(row)
            if missing:
                raise TrainingDataError(f"{p}:{lineno}: missing fields {sorted(missing)}")
            rows.append(row)
    if not rows:
        raise TrainingDataError(f"{p} holds no instances")
    return rows


def _batches(items: list, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _make_optimizer(model, lr: float, name: str = "adamw"):
    if name == "adamw":
        return torch.optim.AdamW(model.parameters(), lr=lr)
    if name == "adafactor":
        from transformers.optimization import Adafactor

        return Adafactor(
            model.parameters(), lr=lr, scale_parameter=False, relative_step=False
        )
    raise ValueError(f"unknown optimizer {name!r}")


def _write_log(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "training_log.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@dataclass
class TrainResult:
    checkpoint: str
    epoch_losses: list[float]
    metrics: dict


# ---------------------------------------------------------------------------
# Entailment classification
# ---------------------------------------------------------------------------

def train_entailment(
    train_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    epochs: int = 3,
    lr: float = 2e-5,
    max_seq_len: int = 128,
    batch_size: int = 8,
    grad_accum: int = 4,
    optimizer: str = "adamw",
    seed: int = 0,
) -> TrainResult:
    rows = _load_jsonl(train_file, {"premise", "hypothesis", "label"})
    for i, row in enumerate(rows, start=1):
        if row["label"] not in ("ENTAILMENT", "CONTRADICTION"):
            raise TrainingDataError(f"line {i}: unknown label {row['label']!r}")
    torch.manual_seed(seed)
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForSequenceClassification.from_pretrained(model_path)
    label2id = {k.upper(): v for k, v in model.config.label2id.items()}
    targets = torch.tensor([label2id[row["label"]] for row in rows])

    enc = tokenizer(
        [r["premise"] for r in rows],
        [r["hypothesis"] for r in rows],
        truncation=True,
        max_length=max_seq_len,
        padding=True,
        return_tensors="pt",
    )
    opt = _make_optimizer(model, lr, optimizer)
    indices = list(range(len(rows)))
    epoch_losses = []
    model.train()
    for _ in range(epochs):
        losses = []
        opt.zero_grad()
        pending = False
        for step, batch in enumerate(_batches(indices, batch_size)):
            idx = torch.tensor(batch)
            out = model(**{k: v[idx] for k, v in enc.items()}, labels=targets[idx])
            (out.loss / grad_accum).backward()
            losses.append(float(out.loss.detach()))
            pending = True
            if (step + 1) % grad_accum == 0:
                opt.step()
                opt.zero_grad()
                pending = False
        if pending:
            opt.step()
            opt.zero_grad()
        epoch_losses.append(sum(losses) / len(losses))
    model.eval()
    with torch.no_grad():
        logits = model(**enc).logits
    accuracy = float((logits.argmax(dim=-1) == targets).float().mean())
    out_path = Path(out_dir)
    model.save_pretrained(out_path)
    tokenizer.save_pretrained(out_path)
    metrics = {"train_accuracy": accuracy, "instances": len(rows)}
    _write_log(out_path, {"task": "entailment", "epoch_losses": epoch_losses, **metrics})
    return TrainResult(str(out_path), epoch_losses, metrics)


# ---------------------------------------------------------------------------
# Masked language modeling
# ---------------------------------------------------------------------------

def _mlm_examples(rows, tokenizer, skipped: list):
    examples = []
    for row in rows:
        target_ids = tokenizer(row["target"], add_special_tokens=False).input_ids
        if len(target_ids) != 1:
            # Multi-token object under a single mask: unsupported, skipped.
            skipped.append(row["target"])
            continue
        text = row["prompt"].replace("{MASK}", tokenizer.mask_token)
        examples.append((text, target_ids[0]))
    return examples


def train_mlm(
    train_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    dev_file: str | Path | None = None,
    epochs: int = 10,
    lr: float = 5e-6,
    batch_size: int = 32,
    optimizer: str = "adamw",
    seed: int = 0,
) -> TrainResult:
    rows = _load_jsonl(train_file, {"prompt", "target"})
    torch.manual_seed(seed)
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForMaskedLM.from_pretrained(model_path)
    skipped: list[str] = []
    train_examples = _mlm_examples(rows, tokenizer, skipped)
    if not train_examples:
        raise TrainingDataError("no single-token targets left after filtering")
    if dev_file is not None:
        dev_examples = _mlm_examples(
            _load_jsonl(dev_file, {"prompt", "target"}), tokenizer, []
        )
    else:
        dev_examples = train_examples  # smoke-scale fallback, reported in the log

    def encode(examples):
        enc = tokenizer(
            [t for t, _ in examples], padding=True, truncation=True, return_tensors="pt"
        )
        labels = torch.full_like(enc.input_ids, -100)
        for i, (_, target_id) in enumerate(examples):
            positions = (enc.input_ids[i] == tokenizer.mask_token_id).nonzero()
            labels[i, int(positions[0])] = target_id
        return enc, labels

    train_enc, train_labels = encode(train_examples)
    dev_enc, dev_labels = encode(dev_examples)

    opt = _make_optimizer(model, lr, optimizer)
    indices = list(range(len(train_examples)))
    epoch_losses, dev_losses = [], []
    best = (math.inf, 0)
    out_path = Path(out_dir)
    for epoch in range(epochs):
        model.train()
        losses = []
        for batch in _batches(indices, batch_size):
            idx = torch.tensor(batch)
            out = model(
                input_ids=train_enc.input_ids[idx],
                attention_mask=train_enc.attention_mask[idx],
                labels=train_labels[idx],
            )
            out.loss.backward()
            opt.step()
            opt.zero_grad()
            losses.append(float(out.loss.detach()))
        epoch_losses.append(sum(losses) / len(losses))
        model.eval()
        with torch.no_grad():
            dev_loss = float(
                model(
                    input_ids=dev_enc.input_ids,
                    attention_mask=dev_enc.attention_mask,
                    labels=dev_labels,
                ).loss
            )
        dev_losses.append(dev_loss)
        checkpoint_dir = out_path / f"epoch-{epoch + 1}"
        model.save_pretrained(checkpoint_dir)
        tokenizer.save_pretrained(checkpoint_dir)
        if dev_loss < best[0]:
            best = (dev_loss, epoch + 1)

    best_dir = out_path / f"epoch-{best[1]}"
    best_model = AutoModelForMaskedLM.from_pretrained(best_dir)
    best_model.save_pretrained(out_path)
    tokenizer.save_pretrained(out_path)
    metrics = {
        "best_epoch": best[1],
        "best_dev_loss": best[0],
        "instances": len(train_examples),
        "skipped_multi_token_targets": len(skipped),
        "dev_is_train": dev_file is None,
    }
    _write_log(out_path, {"task": "mlm", "epoch_losses": epoch_losses,
                          "dev_losses": dev_losses, **metrics})
    return TrainResult(str(out_path), epoch_losses, metrics)


# ---------------------------------------------------------------------------
# Extractive question answering
# ---------------------------------------------------------------------------

def train_qa(
    train_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    epochs: int = 2,
    lr: float = 3e-5,
    max_seq_len: int = 384,
    batch_size: int = 12,
    optimizer: str = "adamw",
    seed: int = 0,
) -> TrainResult:
    rows = _load_jsonl(train_file, {"question", "context", "answers"})
    torch.manual_seed(seed)
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForQuestionAnswering.from_pretrained(model_path)

    enc = tokenizer(
        [r["question"] for r in rows],
        [r["context"] for r in rows],
        truncation="only_second",
        max_length=max_seq_len,
        padding=True,
        return_tensors="pt",
        return_offsets_mapping=True,
    )
    offsets = enc.pop("offset_mapping")
    starts, ends = [], []
    for i, row in enumerate(rows):
        answers = row["answers"]
        if not answers["text"]:
            starts.append(0)  # no-answer trains on [CLS]
            ends.append(0)
            continue
        answer = answers["text"][0]
        char_start = answers["answer_start"][0]
        char_end = char_start + len(answer)
        sequence_ids = enc.sequence_ids(i)
        token_start = token_end = 0
        for t, (s, e) in enumerate(offsets[i].tolist()):
            if sequence_ids[t] != 1:
                continue
            if s <= char_start < e:
                token_start = t
            if s < char_end <= e:
                token_end = t
        if token_start == 0 or token_end == 0:
            token_start = token_end = 0  # truncated answer degrades to no-answer
        starts.append(token_start)
        ends.append(token_end)
    starts_t = torch.tensor(starts)
    ends_t = torch.tensor(ends)

    opt = _make_optimizer(model, lr, optimizer)
    indices = list(range(len(rows)))
    epoch_losses = []
    model.train()
    for _ in range(epochs):
        losses = []
        for batch in _batches(indices, batch_size):
            idx = torch.tensor(batch)
            out = model(
                **{k: v[idx] for k, v in enc.items()},
                start_positions=starts_t[idx],
                end_positions=ends_t[idx],
            )
            out.loss.backward()
            opt.step()
            opt.zero_grad()
            losses.append(float(out.loss.detach()))
        epoch_losses.append(sum(losses) / len(losses))
    out_path = Path(out_dir)
    model.save_pretrained(out_path)
    tokenizer.save_pretrained(out_path)
    metrics = {"instances": len(rows)}
    _write_log(out_path, {"task": "qa", "epoch_losses": epoch_losses, **metrics})
    return TrainResult(str(out_path), epoch_losses, metrics)


# ---------------------------------------------------------------------------
# Relation extraction (sequence-to-sequence)
# ---------------------------------------------------------------------------

def linearize_triples(triples: list[dict]) -> str:
    parts = []
    for t in triples:
        parts.append(
            f"{TRIPLET_TOKEN} {t['subject']} {SUBJECT_TOKEN} {t['object']} "
            f"{OBJECT_TOKEN} {t['relation']}"
        )
    return " ".join(parts)


def train_re(
    train_file: str | Path,
    model_path: str,
    out_dir: str | Path,
    epochs: int = 3,
    lr: float = 5e-5,
    batch_size: int = 8,
    optimizer: str = "adamw",
    seed: int = 0,
) -> TrainResult:
    rows = _load_jsonl(train_file, {"text", "triples"})
    for i, row in enumerate(rows, start=1):
        for triple in row["triples"]:
            if not {"subject", "relation", "object"} <= set(triple):
                raise TrainingDataError(f"line {i}: malformed triple {triple}")
    torch.manual_seed(seed)
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = EncoderDecoderModel.from_pretrained(model_path)
    for tag in (TRIPLET_TOKEN, SUBJECT_TOKEN, OBJECT_TOKEN):
        if tokenizer.convert_tokens_to_ids(tag) == tokenizer.unk_token_id:
            raise TrainingDataError(
                f"tokenizer lacks the {tag} tag; build the checkpoint with it included"
            )

    sources = tokenizer(
        [r["text"] for r in rows], padding=True, truncation=True, return_tensors="pt"
    )
    target_texts = [linearize_triples(r["triples"]) for r in rows]
    targets = tokenizer(
        target_texts, padding=True, truncation=True, return_tensors="pt"
    ).input_ids
    targets[targets == tokenizer.pad_token_id] = -100

    opt = _make_optimizer(model, lr, optimizer)
    indices = list(range(len(rows)))
    epoch_losses = []
    model.train()
    for _ in range(epochs):
        losses = []
        for batch in _batches(indices, batch_size):
            idx = torch.tensor(batch)
            out = model(
                input_ids=sources.input_ids[idx],
                attention_mask=sources.attention_mask[idx],
                labels=targets[idx],
            )
            out.loss.backward()
            opt.step()
            opt.zero_grad()
            losses.append(float(out.loss.detach()))
        epoch_losses.append(sum(losses) / len(losses))
    out_path = Path(out_dir)
    model.save_pretrained(out_path)
    tokenizer.save_pretrained(out_path)
    metrics = {"instances": len(rows)}
    _write_log(out_path, {"task": "re", "epoch_losses": epoch_losses, **metrics})
    return TrainResult(str(out_path), epoch_losses, metrics)
