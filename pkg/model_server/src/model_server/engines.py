"""Capability engines wrapping transformer checkpoints.

Each engine loads a checkpoint directory (or hub identifier, when the
environment can reach a model hub) and exposes one method matching the wire
contract. Prompts arrive with the {MASK} marker and are mapped to the
model's own mask token; all outputs satisfy the backend postconditions by
construction (sorted scores, span offsets that slice the input text, the
("", 1.0, -1, -1) no-answer convention).
"""

from __future__ import annotations

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForQuestionAnswering,
    AutoModelForSequenceClassification,
    AutoModelForTokenClassification,
    AutoTokenizer,
    EncoderDecoderModel,
)

MASK_MARKER = "{MASK}"

TRIPLET_TOKEN = "<triplet>"
SUBJECT_TOKEN = "<subj>"
OBJECT_TOKEN = "<obj>"


class EngineError(ValueError):
    """A request violated the capability contract (maps to HTTP 400)."""


def _no_grad(fn):
    return torch.no_grad()(fn)


class MaskFillEngine:
    def __init__(self, model_path: str):
        self.name = model_path
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForMaskedLM.from_pretrained(model_path)
        self.model.eval()

    @_no_grad
    def fill_mask(self, prompt: str, top_n: int) -> list[dict]:
        if prompt.count(MASK_MARKER) != 1:
            raise EngineError(f"prompt must contain exactly one {MASK_MARKER}")
        if top_n < 1:
            raise EngineError("top_n must be positive")
        text = prompt.replace(MASK_MARKER, self.tokenizer.mask_token)
        enc = self.tokenizer(text, return_tensors="pt", truncation=True)
        mask_positions = (enc.input_ids[0] == self.tokenizer.mask_token_id).nonzero()
        if len(mask_positions) != 1:
            raise EngineError("mask token was lost in tokenization")
        logits = self.model(**enc).logits[0, int(mask_positions[0])]
        probs = torch.softmax(logits, dim=-1)
        special = set(self.tokenizer.all_special_ids)
        results = []
        for prob, token_id in zip(*torch.sort(probs, descending=True)):
            token_id = int(token_id)
            if token_id in special:
                continue
            token = self.tokenizer.convert_ids_to_tokens(token_id)
            if token.startswith("##"):  # only whole words can be objects
                continue
            results.append({"token": token, "score": float(prob)})
            if len(results) >= top_n:
                break
        return results


class EntailmentEngine:
    CLASSES = ("entail", "contradiction", "neutral")

    def __init__(self, model_path: str):
        self.name = model_path
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_path)
        self.model.eval()
        self._index = self._resolve_label_indices()

    def _resolve_label_indices(self) -> dict[str, int]:
        id2label = {int(k): v.lower() for k, v in self.model.config.id2label.items()}
        index: dict[str, int] = {}
        for idx, label in id2label.items():
            if label.startswith("entail"):
                index["entail"] = idx
            elif label.startswith("contra"):
                index["contradiction"] = idx
            elif label.startswith("neutral"):
                index["neutral"] = idx
        if set(index) != set(self.CLASSES):
            raise EngineError(
                f"model labels {sorted(id2label.values())} do not name "
                "entailment/contradiction/neutral classes"
            )
        return index

    @_no_grad
    def entail(self, premise: str, hypothesis: str) -> dict:
        if not premise.strip() or not hypothesis.strip():
            raise EngineError("premise and hypothesis must be non-empty")
        enc = self.tokenizer(premise, hypothesis, return_tensors="pt", truncation=True)
        logits = self.model(**enc).logits[0]
        return {name: float(logits[self._index[name]]) for name in self.CLASSES}


class NerEngine:
    def __init__(self, model_path: str):
        self.name = model_path
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForTokenClassification.from_pretrained(model_path)
        self.model.eval()

    @_no_grad
    def ner(self, text: str) -> list[dict]:
        if not text.strip():
            raise EngineError("text must be non-empty")
        enc = self.tokenizer(
            text, return_tensors="pt", truncation=True, return_offsets_mapping=True
        )
        offsets = enc.pop("offset_mapping")[0].tolist()
        predictions = self.model(**enc).logits[0].argmax(dim=-1).tolist()
        id2label = {int(k): v for k, v in self.model.config.id2label.items()}
        spans = []
        current: dict | None = None
        for (start, end), label_id in zip(offsets, predictions):
            if start == end:  # special token
                continue
            label = id2label.get(label_id, "O")
            if label.startswith("B-"):
                if current:
                    spans.append(current)
                current = {"label": label[2:], "start": start, "end": end}
            elif label.startswith("I-") and current and current["label"] == label[2:]:
                current["end"] = end
            else:
                if current:
                    spans.append(current)
                current = None
        if current:
            spans.append(current)
        return [
            {
                "surface": text[s["start"]:s["end"]],
                "label": s["label"],
                "start": s["start"],
                "end": s["end"],
            }
            for s in spans
            if s["label"] in ("PER", "LOC", "ORG") and s["start"] < s["end"]
        ]


class QaEngine:
    def __init__(self, model_path: str, max_answer_tokens: int = 30):
        self.name = model_path
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModelForQuestionAnswering.from_pretrained(model_path)
        self.model.eval()
        self.max_answer_tokens = max_answer_tokens

    @_no_grad
    def qa(self, question: str, context: str) -> dict:
        if not question.strip() or not context.strip():
            raise EngineError("question and context must be non-empty")
        enc = self.tokenizer(
            question,
            context,
            return_tensors="pt",
            truncation="only_second",
            max_length=384,
            return_offsets_mapping=True,
        )
        offsets = enc.pop("offset_mapping")[0].tolist()
        sequence_ids = enc.sequence_ids(0)
        out = self.model(**enc)
        start_probs = torch.softmax(out.start_logits[0], dim=-1)
        end_probs = torch.softmax(out.end_logits[0], dim=-1)

        # No-answer score: both boundaries on [CLS], the SQuAD 2.0 convention.
        null_score = float(start_probs[0] * end_probs[0])
        n = len(offsets)
        in_context = torch.tensor(
            [sid == 1 and offsets[i][0] != offsets[i][1] for i, sid in enumerate(sequence_ids)]
        )
        pair_scores = start_probs[:, None] * end_probs[None, :]
        valid = in_context[:, None] & in_context[None, :]
        span_len = torch.arange(n)[None, :] - torch.arange(n)[:, None]
        valid &= (span_len >= 0) & (span_len < self.max_answer_tokens)
        pair_scores = torch.where(valid, pair_scores, torch.zeros(()))
        best_score = float(pair_scores.max())
        if best_score <= null_score:
            return {"answer": "", "score": min(max(null_score, 0.0), 1.0), "start": -1, "end": -1}
        flat = int(pair_scores.argmax())
        i, j = divmod(flat, n)
        start_char, end_char = offsets[i][0], offsets[j][1]
        return {
            "answer": context[start_char:end_char],
            "score": min(max(best_score, 0.0), 1.0),
            "start": start_char,
            "end": end_char,
        }


class RelextEngine:
    """Sequence-to-sequence triple generation with tagged linearization.

    Targets are linearized as: <triplet> subject <subj> object <obj> relation,
    repeated per triple, following the format popularized by end-to-end
    relation-extraction models.
    """

    def __init__(self, model_path: str, max_new_tokens: int = 64):
        self.name = model_path
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = EncoderDecoderModel.from_pretrained(model_path)
        self.model.eval()
        self.max_new_tokens = max_new_tokens

    @_no_grad
    def extract_relations(self, text: str) -> list[dict]:
        if not text.strip():
            raise EngineError("text must be non-empty")
        enc = self.tokenizer(text, return_tensors="pt", truncation=True)
        generated = self.model.generate(
            enc.input_ids,
            attention_mask=enc.attention_mask,
            max_new_tokens=self.max_new_tokens,
            num_beams=1,
            do_sample=False,
        )
        decoded = self.tokenizer.decode(generated[0], skip_special_tokens=False)
        return parse_linearized_triples(decoded)


def parse_linearized_triples(text: str) -> list[dict]:
    triples = []
    for chunk in text.split(TRIPLET_TOKEN)[1:]:
        chunk = chunk.split("[SEP]")[0].split("</s>")[0]
        if SUBJECT_TOKEN not in chunk or OBJECT_TOKEN not in chunk:
            continue
        subject, rest = chunk.split(SUBJECT_TOKEN, 1)
        obj, relation = rest.split(OBJECT_TOKEN, 1)
        subject, obj, relation = subject.strip(), obj.strip(), relation.strip()
        if subject and obj and relation:
            triples.append({"subject": subject, "relation": relation, "object": obj})
    return triples
