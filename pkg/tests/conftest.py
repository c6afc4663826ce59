from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from satori.core import RelationRegistry, RelationSchema

FIXTURES_DIR = Path(__file__).parent.parent / "fixtures"
CONFIG_DIR = Path(__file__).parent.parent / "config"


def make_test_registry() -> RelationRegistry:
    return RelationRegistry(
        [
            RelationSchema(
                name="PersonInstrument",
                domain_class="Person",
                range_classes=("MusicalInstrument",),
                t_search="{X} plays instrument",
                t_lm="{X} plays {MASK}.",
                t_h="{X} plays {Y}.",
                t_qa="What instruments plays {X}?",
                sources=frozenset({"LM", "KG"}),
                T_lm=0.1,
                T_e=0.5,
                T_qa=0.5,
                optional_relation=True,
            ),
            RelationSchema(
                name="CountryOfficialLanguage",
                domain_class="Country",
                range_classes=("Language",),
                t_search="{X} official language",
                t_lm="The official language of {X} is {MASK}.",
                t_h="The official language of {X} is {Y}.",
                t_qa="What languages are official in {X}?",
                sources=frozenset({"LM", "KG"}),
                T_lm=0.1,
                T_e=0.5,
                T_qa=0.5,
            ),
            RelationSchema(
                name="PersonPlaceOfDeath",
                domain_class="Person",
                range_classes=("Place",),
                t_search="{X} place of death",
                t_lm="{X} died in {MASK}.",
                t_h="{X} died in {Y}.",
                t_qa="Where did {X} die?",
                sources=frozenset({"NER"}),
                T_e=0.5,
                optional_relation=True,
            ),
        ],
        ner_class_labels={"Place": "LOC", "Company": "ORG"},
    )


@pytest.fixture()
def registry() -> RelationRegistry:
    return make_test_registry()


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    assert FIXTURES_DIR.exists(), "shipped fixture corpus missing"
    return FIXTURES_DIR
