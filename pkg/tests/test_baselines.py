from __future__ import annotations

from hypothesis import given
from hypothesis import strategies as st

from satori.core import InputPair
from satori.backends.base import ExtractedTriple, MaskFillResult, QaAnswer
from satori.backends.fixture import (
    FixtureMaskFill,
    FixtureQa,
    FixtureRelationExtraction,
)
from satori.baselines import (
    FLAG_UNSUPPORTED,
    lm_baseline,
    qa_baseline,
    re_baseline,
    split_list_answer,
)

from conftest import make_test_registry
from stubs import make_premises

PAIR = InputPair("John Lennon", "PersonInstrument")
PROMPT = "John Lennon plays {MASK}."
QUESTION = "What instruments plays John Lennon?"


class TestLmBaseline:
    def test_threshold_and_stopwords_only(self, registry):
        backend = FixtureMaskFill(
            {
                PROMPT: [
                    MaskFillResult("the", 0.4),
                    MaskFillResult("guitar", 0.3),
                    MaskFillResult("piano", 0.1),
                ]
            }
        )
        record = lm_baseline(PAIR, registry, backend, frozenset({"the"}), threshold=0.2)
        assert record.surfaces == ["guitar"]  # "the" stopworded, "piano" below 0.2
        assert record.objects[0].score == 0.3

    def test_threshold_above_all_scores(self, registry):
        backend = FixtureMaskFill({PROMPT: [MaskFillResult("guitar", 0.3)]})
        assert lm_baseline(PAIR, registry, backend, frozenset(), threshold=0.5).surfaces == []

    def test_no_stopwords_all_kept(self, registry):
        backend = FixtureMaskFill(
            {PROMPT: [MaskFillResult("guitar", 0.3), MaskFillResult("piano", 0.25)]}
        )
        record = lm_baseline(PAIR, registry, backend, frozenset(), threshold=0.2)
        assert record.surfaces == ["guitar", "piano"]

    def test_no_mention_filter_or_validation(self, registry):
        # Tokens never seen in any premise still pass; only the stoplist applies.
        backend = FixtureMaskFill({PROMPT: [MaskFillResult("zzzunseen", 0.9)]})
        record = lm_baseline(PAIR, registry, backend, frozenset(), threshold=0.5)
        assert record.surfaces == ["zzzunseen"]

    @given(
        scores=st.lists(st.floats(0, 1), max_size=15),
        t1=st.floats(0, 1),
        t2=st.floats(0, 1),
    )
    def test_monotone_contracting_in_threshold(self, scores, t1, t2):
        registry = make_test_registry()
        lo, hi = min(t1, t2), max(t1, t2)
        backend = FixtureMaskFill(
            {
                PROMPT: [
                    MaskFillResult(f"tok{i}", s)
                    for i, s in enumerate(sorted(scores, reverse=True))
                ]
            }
        )
        at_lo = set(lm_baseline(PAIR, registry, backend, frozenset(), threshold=lo).surfaces)
        at_hi = set(lm_baseline(PAIR, registry, backend, frozenset(), threshold=hi).surfaces)
        assert at_hi <= at_lo


class TestSplitListAnswer:
    def test_comma_list_with_final_and(self):
        assert split_list_answer("guitar, keyboard, harmonica and horn") == [
            "guitar",
            "keyboard",
            "harmonica",
            "horn",
        ]

    def test_single_item(self):
        assert split_list_answer("guitar") == ["guitar"]

    def test_empty(self):
        assert split_list_answer("") == []

    def test_oxford_comma(self):
        assert split_list_answer("guitar, keyboard, and horn") == [
            "guitar",
            "keyboard",
            "horn",
        ]

    def test_final_or(self):
        assert split_list_answer("guitar or piano") == ["guitar", "piano"]

    def test_only_final_coordinator_splits(self):
        assert split_list_answer("rock and roll and jazz") == ["rock and roll", "jazz"]

    def test_no_empty_items(self):
        assert split_list_answer(" , guitar ,, piano , ") == ["guitar", "piano"]

    @given(st.text(max_size=60))
    def test_never_returns_empty_strings(self, answer):
        assert all(item.strip() == item and item for item in split_list_answer(answer))

    @given(st.text(max_size=60))
    def test_rejoining_is_stable(self, answer):
        items = split_list_answer(answer)
        assert split_list_answer(", ".join(items)) == items


class TestQaBaseline:
    P1 = "John Lennon plays guitar, keyboard and harmonica on stage."
    P2 = "Some unrelated text about Liverpool."
    P3 = "Lennon's main instrument was always the guitar."

    def _backend(self):
        return FixtureQa(
            {
                (QUESTION, self.P1): QaAnswer(
                    "guitar, keyboard and harmonica", 0.9,
                    self.P1.index("guitar"), self.P1.index("guitar") + len("guitar, keyboard and harmonica"),
                ),
                (QUESTION, self.P2): QaAnswer("", 1.0, -1, -1),
                (QUESTION, self.P3): QaAnswer("guitar", 0.4, self.P3.index("guitar"), self.P3.index("guitar") + 6),
            }
        )

    def test_union_with_threshold(self, registry):
        premises = make_premises([self.P1, self.P2, self.P3])
        record = qa_baseline(PAIR, premises, self._backend(), registry, threshold=0.5)
        assert record.surfaces == ["guitar", "keyboard", "harmonica"]

    def test_all_below_threshold(self, registry):
        premises = make_premises([self.P3])
        record = qa_baseline(PAIR, premises, self._backend(), registry, threshold=0.95)
        assert record.surfaces == []

    def test_empty_answers_contribute_nothing(self, registry):
        premises = make_premises([self.P2])
        record = qa_baseline(PAIR, premises, self._backend(), registry, threshold=0.1)
        assert record.surfaces == []

    def test_duplicates_across_premises_merge(self, registry):
        premises = make_premises([self.P1, self.P3])
        record = qa_baseline(PAIR, premises, self._backend(), registry, threshold=0.3)
        assert record.surfaces == ["guitar", "keyboard", "harmonica"]

    def test_premise_order_invariant_set(self, registry):
        forward = make_premises([self.P1, self.P3])
        backward = make_premises([self.P3, self.P1])
        a = qa_baseline(PAIR, forward, self._backend(), registry, threshold=0.3)
        b = qa_baseline(PAIR, backward, self._backend(), registry, threshold=0.3)
        assert set(a.surfaces) == set(b.surfaces)
        scores_a = {o.surface.lower(): o.score for o in a.objects}
        scores_b = {o.surface.lower(): o.score for o in b.objects}
        assert scores_a == scores_b  # max score per item, order-free


class TestReBaseline:
    MAP = {"PersonInstrument": "instrument", "PersonCauseOfDeath": None}
    TEXT = "John Lennon plays guitar on the record."

    def _backend(self, triples=None):
        return FixtureRelationExtraction(
            {
                self.TEXT: triples
                if triples is not None
                else [
                    ExtractedTriple("John Lennon", "instrument", "guitar"),
                    ExtractedTriple("John Lennon", "record label", "Apple"),
                    ExtractedTriple("Paul", "instrument", "bass"),
                ]
            }
        )

    def test_keeps_matching_relation_and_subject(self):
        record = re_baseline(PAIR, make_premises([self.TEXT]), self._backend(), self.MAP)
        assert record.surfaces == ["guitar"]
        assert record.flags == ()

    def test_wrong_relation_label_dropped(self):
        backend = self._backend([ExtractedTriple("John Lennon", "spouse", "Yoko")])
        record = re_baseline(PAIR, make_premises([self.TEXT]), backend, self.MAP)
        assert record.surfaces == []

    def test_subject_match_flag_off_keeps_other_subjects(self):
        record = re_baseline(
            PAIR, make_premises([self.TEXT]), self._backend(), self.MAP,
            require_subject_match=False,
        )
        assert record.surfaces == ["guitar", "bass"]

    def test_unmapped_relation_is_flagged_unsupported(self):
        pair = InputPair("Someone", "PersonCauseOfDeath")
        record = re_baseline(pair, make_premises([self.TEXT]), self._backend(), self.MAP)
        assert record.surfaces == []
        assert record.flags == (FLAG_UNSUPPORTED,)

    def test_case_insensitive_label_and_dedup(self):
        backend = self._backend(
            [
                ExtractedTriple("john lennon", "Instrument", "Guitar"),
                ExtractedTriple("John Lennon", "instrument", "guitar"),
            ]
        )
        record = re_baseline(PAIR, make_premises([self.TEXT]), backend, self.MAP)
        assert record.surfaces == ["Guitar"]
