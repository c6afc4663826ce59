#!/usr/bin/env python3
"""Regenerate the shipped fixture corpus under fixtures/.

The corpus is a small authored world: four relations, six subjects each,
with premise texts, mask-fill tables, KG instance lists, NER spans, QA
answers, extracted triples, and an entailment table enumerated for every
(premise, hypothesis) the pipeline can ask about. Timestamps are fixed so
reruns are byte-identical. The script finishes by running the CLI over the
corpus to refresh the golden prediction/evaluation files, asserting the
hand-derived expectations along the way.

Run from the repository root:  python scripts/build_fixture_corpus.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from satori.core import dump_json_line  # noqa: E402

FIXTURES = REPO / "fixtures"
BACKENDS = FIXTURES / "backends"
GOLDEN = FIXTURES / "golden"
STAMP = "2025-01-15T00:00:00Z"

# Entailment logit levels and their two-class probabilities (logistic of e - c):
#   S 0.98201  W 0.73106  N 0.5  D 0.26894  R 0.01799
LEVELS = {
    "S": (4.0, 0.0, 1.0),
    "W": (1.0, 0.0, 0.5),
    "N": (0.0, 0.0, 3.0),
    "D": (-1.0, 0.0, 1.0),
    "R": (0.0, 4.0, 1.0),
}
DEFAULT_LEVEL = "D"

RELATIONS = {
    "ner_class_labels": {"Place": "LOC", "Company": "ORG"},
    "relations": [
        {
            "name": "PersonInstrument",
            "domain_class": "Person",
            "range_classes": ["MusicalInstrument"],
            "t_search": "{X} plays instrument",
            "t_lm": "{X} plays {MASK}.",
            "t_h": "{X} plays {Y}.",
            "t_qa": "What instruments plays {X}?",
            "sources": ["LM", "KG"],
            "T_lm": 0.1,
            "T_e": 0.5,
            "T_qa": 0.5,
            "optional_relation": True,
        },
        {
            "name": "CountryOfficialLanguage",
            "domain_class": "Country",
            "range_classes": ["Language"],
            "t_search": "{X} official language",
            "t_lm": "The official language of {X} is {MASK}.",
            "t_h": "The official language of {X} is {Y}.",
            "t_qa": "What languages are official in {X}?",
            "sources": ["LM", "KG"],
            "T_lm": 0.1,
            "T_e": 0.5,
            "T_qa": 0.5,
        },
        {
            "name": "PersonPlaceOfDeath",
            "domain_class": "Person",
            "range_classes": ["Place"],
            "t_search": "{X} place of death",
            "t_lm": "{X} died in {MASK}.",
            "t_h": "{X} died in {Y}.",
            "t_qa": "Where did {X} die?",
            "sources": ["NER"],
            "T_lm": 0.1,
            "T_e": 0.5,
            "T_qa": 0.5,
            "optional_relation": True,
        },
        {
            "name": "CompanyParentOrganization",
            "domain_class": "Company",
            "range_classes": ["Company"],
            "t_search": "{X} parent organization",
            "t_lm": "{X} is owned by {MASK}.",
            "t_h": "The parent organization of {X} is {Y}.",
            "t_qa": "What is the parent organization of {X}?",
            "sources": ["NER"],
            "T_lm": 0.1,
            "T_e": 0.5,
            "T_qa": 0.5,
            "optional_relation": True,
        },
    ],
}

KG_INSTANCES = {
    "MusicalInstrument": [
        "Guitar", "Piano", "Violin", "Cello", "Drums", "Harmonica", "Flute", "guitar",
    ],  # trailing duplicate exercises backend-side dedup
    "Language": [
        "English", "French", "Spanish", "Niuean", "Montavian", "Valdorian",
        "Kestrelian", "Greek", "Ordric", "German",
    ],
}

# One entry per (subject, relation) pair. Fields:
#   gold      gold alias-sets
#   premises  snippet texts, rank order
#   fill_mask (token, score) rows for the relation's prompt
#   entail    canonical object -> per-premise levels (default D everywhere else)
#   ner       per-premise [(surface, label)] spans (NER relations)
#   qa        per-premise answer (text, score) or None for no-answer
#   relext    per-premise extracted (subject, relation label, object) triples
#   expect    objects the pipeline must accept, in merge order
WORLD = [
    # ----------------------------------------------------------- PersonInstrument
    {
        "relation": "PersonInstrument",
        "subject": "John Lennon",
        "gold": [["guitar"], ["piano"], ["harmonica"]],
        "premises": [
            "John Lennon plays guitar, piano and harmonica on most of the early records.",
            "Critics noted that John Lennon plays guitar with a percussive style, though he never mastered the drums.",
            "A museum in Liverpool displays the piano John Lennon composed on.",
        ],
        "fill_mask": [
            ("guitar", 0.30), ("piano", 0.22), ("drums", 0.18),
            ("himself", 0.09), ("harmonica", 0.07), ("the", 0.05),
        ],
        "entail": {
            "guitar": "SSN",
            "piano": "SNS",
            "drums": "RRR",
            "harmonica": "WDD",
        },
        "qa": [("guitar, piano and harmonica", 0.88), ("guitar", 0.55), ("piano", 0.40)],
        "relext": [
            [("John Lennon", "instrument", "guitar")],
            [("John Lennon", "instrument", "guitar")],
            [],
        ],
        "expect": ["guitar", "piano"],
    },
    {
        "relation": "PersonInstrument",
        "subject": "Mira Calloway",
        "gold": [["violin"], ["piano"]],
        "premises": [
            "Mira Calloway plays violin and piano in the civic orchestra.",
            "The violin was Mira Calloway's first instrument.",
            "Calloway studied piano at the conservatory.",
        ],
        "fill_mask": [
            ("violin", 0.28), ("piano", 0.20), ("guitar", 0.12), ("chess", 0.08),
        ],
        "entail": {"violin": "SSN", "piano": "SNS"},
        "qa": [("violin and piano", 0.80), ("violin", 0.60), (None, 1.0)],
        "relext": [
            [("Mira Calloway", "instrument", "violin"), ("Mira Calloway", "instrument", "piano")],
            [("Mira Calloway", "instrument", "violin")],
            [("Calloway", "instrument", "piano")],
        ],
        "expect": ["violin", "piano"],
    },
    {
        "relation": "PersonInstrument",
        "subject": "Dexter Holt",
        "gold": [["drums"]],
        "premises": [
            "Dexter Holt plays drums for the touring band.",
            "Holt's drum kit setup is famous among sound engineers.",
            "Dexter Holt once joked he cannot play guitar at all.",
        ],
        "fill_mask": [("drums", 0.35), ("guitar", 0.15), ("poker", 0.07)],
        "entail": {"drums": "SWN", "guitar": "RRR"},
        "qa": [("drums", 0.90), (None, 1.0), ("guitar", 0.45)],
        "relext": [
            [("Dexter Holt", "instrument", "drums")],
            [],
            [("Dexter Holt", "hobby", "guitar")],
        ],
        "expect": ["drums"],
    },
    {
        "relation": "PersonInstrument",
        "subject": "Elena Vasquez",
        "gold": [["cello"]],
        "premises": [
            "Elena Vasquez plays cello in a string quartet.",
            "Vasquez has recorded three cello concertos.",
            "Elena Vasquez plays chess on weekends.",
        ],
        "fill_mask": [("cello", 0.25), ("violin", 0.12), ("chess", 0.11), ("piano", 0.05)],
        # "Elena Vasquez plays chess" really is entailed by the third premise,
        # so validation accepts a wrong object: an honest false positive.
        "entail": {"cello": "SSN", "chess": "DDS"},
        "qa": [("cello", 0.85), ("cello", 0.60), ("chess", 0.70)],
        "relext": [
            [("Elena Vasquez", "instrument", "cello")],
            [("Elena Vasquez", "instrument", "cello")],
            [("Elena Vasquez", "hobby", "chess")],
        ],
        "expect": ["cello", "chess"],
    },
    {
        "relation": "PersonInstrument",
        "subject": "Tomas Lindqvist",
        "gold": [],
        "premises": [
            "Tomas Lindqvist is a celebrated sculptor from Malmo.",
            "Lindqvist's bronze works appear in several museums.",
        ],
        "fill_mask": [("football", 0.18), ("the", 0.09), ("himself", 0.08)],
        "entail": {},
        "qa": [(None, 1.0), (None, 1.0)],
        "relext": [[], []],
        "expect": [],
    },
    {
        "relation": "PersonInstrument",
        "subject": "Priya Raman",
        "gold": [],
        "premises": [],
        "fill_mask": [("sitar", 0.20), ("veena", 0.12)],
        "entail": {},
        "qa": [],
        "relext": [],
        "expect": [],
    },
    # ---------------------------------------------------- CountryOfficialLanguage
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Niue",
        "gold": [["Niuean"], ["English"]],
        "premises": [
            "Niuean and English are the official languages of Niue.",
            "Niue is a small island nation in the South Pacific.",
            "Most residents of Niue speak Niuean at home.",
        ],
        "fill_mask": [("Niuean", 0.32), ("English", 0.21), ("Maori", 0.12), ("the", 0.06)],
        "entail": {"niuean": "SNW", "english": "SND"},
        "qa": [("Niuean and English", 0.90), (None, 1.0), (None, 1.0)],
        "relext": [
            [("Niue", "official language", "Niuean"), ("Niue", "official language", "English")],
            [],
            [("Niue", "language used", "Niuean")],
        ],
        "expect": ["Niuean", "English"],
    },
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Valdoria",
        "gold": [["Valdorian"]],
        "premises": [
            "Valdorian is the official language of Valdoria.",
            "Valdoria borders three mountain republics.",
            "French is widely taught in Valdoria's schools.",
        ],
        "fill_mask": [("Valdorian", 0.30), ("French", 0.18), ("German", 0.07)],
        "entail": {"valdorian": "SNN", "french": "DDD"},
        "qa": [("Valdorian", 0.90), (None, 1.0), ("French", 0.55)],
        "relext": [
            [("Valdoria", "official language", "Valdorian")],
            [],
            [("Valdoria", "language taught", "French")],
        ],
        "expect": ["Valdorian"],
    },
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Kestrel Islands",
        "gold": [["English"], ["Kestrelian"]],
        "premises": [
            "English and Kestrelian hold official status in the Kestrel Islands.",
            "The Kestrel Islands comprise forty coral atolls.",
            "Kestrelian is spoken by elders across the Kestrel Islands.",
        ],
        "fill_mask": [("English", 0.25), ("Kestrelian", 0.14), ("Dutch", 0.11)],
        "entail": {"english": "SND", "kestrelian": "SNW"},
        "qa": [("English and Kestrelian", 0.85), (None, 1.0), ("Kestrelian", 0.45)],
        "relext": [
            [("Kestrel Islands", "official language", "English")],
            [],
            [],
        ],
        "expect": ["English", "Kestrelian"],
    },
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Montavia",
        "gold": [["Montavian"], ["French"]],
        "premises": [
            "Montavian is the official language of Montavia.",
            "French serves as Montavia's second official language in commerce.",
            "Montavia's constitution dates from 1854.",
        ],
        "fill_mask": [("Montavian", 0.28), ("French", 0.19), ("Italian", 0.09)],
        "entail": {"montavian": "SNN", "french": "DSN"},
        "qa": [("Montavian", 0.80), ("French", 0.75), ("1854", 0.35)],
        "relext": [
            [("Montavia", "official language", "Montavian")],
            [],
            [],
        ],
        "expect": ["Montavian", "French"],
    },
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Zanthe",
        "gold": [["Greek"]],
        "premises": [
            "Greek is the official language of Zanthe.",
            "Zanthe lies in the eastern archipelago.",
            "Tourism dominates Zanthe's economy.",
        ],
        "fill_mask": [("Greek", 0.30), ("English", 0.15)],
        "entail": {"greek": "SNN"},
        "qa": [("Greek", 0.90), (None, 1.0), (None, 1.0)],
        "relext": [[("Zanthe", "official language", "Greek")], [], []],
        "expect": ["Greek"],
    },
    {
        "relation": "CountryOfficialLanguage",
        "subject": "Ordu Republic",
        "gold": [["Ordric"]],
        "premises": ["Ordric is the official language of the Ordu Republic."],
        "fill_mask": [("Ordric", 0.26), ("Russian", 0.13)],
        "entail": {"ordric": "S"},
        "qa": [("Ordric", 0.88)],
        "relext": [[("Ordu Republic", "official language", "Ordric")]],
        "expect": ["Ordric"],
    },
    # --------------------------------------------------------- PersonPlaceOfDeath
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Harold Finch",
        "gold": [["Lisbon"]],
        "premises": [
            "Harold Finch died in Lisbon after a long illness.",
            "Finch spent his final years in Portugal.",
            "A memorial for Harold Finch stands in Lisbon's old quarter.",
        ],
        "fill_mask": [("Lisbon", 0.30), ("Portugal", 0.20), ("London", 0.10)],
        "entail": {"lisbon": "SDW", "portugal": "DDD"},
        "ner": [
            [("Harold Finch", "PER"), ("Lisbon", "LOC")],
            [("Finch", "PER"), ("Portugal", "LOC")],
            [("Harold Finch", "PER"), ("Lisbon", "LOC")],
        ],
        "qa": [("Lisbon", 0.92), ("Portugal", 0.60), ("Lisbon", 0.50)],
        "relext": [
            [("Harold Finch", "place of death", "Lisbon")],
            [("Finch", "residence", "Portugal")],
            [],
        ],
        "expect": ["Lisbon"],
    },
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Beatrice Mallory",
        "gold": [["Vienna"]],
        "premises": [
            "Beatrice Mallory died in Vienna in 1998.",
            "Mallory's archive moved to Vienna after the estate was settled.",
            "Beatrice Mallory composed a final opera in Salzburg.",
        ],
        "fill_mask": [("Vienna", 0.25), ("Salzburg", 0.12)],
        "entail": {"vienna": "SWN", "salzburg": "DDD"},
        "ner": [
            [("Beatrice Mallory", "PER"), ("Vienna", "LOC")],
            [("Mallory", "PER"), ("Vienna", "LOC")],
            [("Beatrice Mallory", "PER"), ("Salzburg", "LOC")],
        ],
        "qa": [("Vienna", 0.90), (None, 1.0), ("Salzburg", 0.30)],
        "relext": [[("Beatrice Mallory", "place of death", "Vienna")], [], []],
        "expect": ["Vienna"],
    },
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Royce Tanner",
        "gold": [["Cape Town"]],
        "premises": [
            "Royce Tanner died in Cape Town at the age of 81.",
            "Tanner had settled near Cape Town years earlier.",
            "Royce Tanner's novels are set in Johannesburg.",
        ],
        "fill_mask": [("Cape Town", 0.28), ("Johannesburg", 0.11)],
        "entail": {"cape town": "SWD", "johannesburg": "DDD"},
        "ner": [
            [("Royce Tanner", "PER"), ("Cape Town", "LOC")],
            [("Tanner", "PER"), ("Cape Town", "LOC")],
            [("Royce Tanner", "PER"), ("Johannesburg", "LOC")],
        ],
        "qa": [("Cape Town", 0.90), ("Cape Town", 0.55), ("Johannesburg", 0.40)],
        "relext": [[("Royce Tanner", "place of death", "Cape Town")], [], []],
        "expect": ["Cape Town"],
    },
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Livia Moreno",
        "gold": [],
        "premises": [
            "Livia Moreno continues to perform in Madrid.",
            "Moreno's latest film premiered in March.",
        ],
        "fill_mask": [("Madrid", 0.20)],
        "entail": {"madrid": "RD"},
        "ner": [
            [("Livia Moreno", "PER"), ("Madrid", "LOC")],
            [("Moreno", "PER")],
        ],
        "qa": [("Madrid", 0.65), (None, 1.0)],
        "relext": [[("Livia Moreno", "residence", "Madrid")], []],
        "expect": [],
    },
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Anselm Richter",
        "gold": [["Graz"]],
        "premises": [
            "Anselm Richter died peacefully in Graz.",
            "Richter taught in Graz for decades.",
            "Anselm Richter was born in Linz.",
        ],
        "fill_mask": [("Graz", 0.30), ("Linz", 0.10)],
        "entail": {"graz": "SWD", "linz": "DDR"},
        "ner": [
            [("Anselm Richter", "PER"), ("Graz", "LOC")],
            [("Richter", "PER"), ("Graz", "LOC")],
            [("Anselm Richter", "PER"), ("Linz", "LOC")],
        ],
        "qa": [("Graz", 0.90), ("Graz", 0.60), ("Linz", 0.45)],
        "relext": [
            [("Anselm Richter", "place of death", "Graz")],
            [],
            [("Anselm Richter", "place of birth", "Linz")],
        ],
        "expect": ["Graz"],
    },
    {
        "relation": "PersonPlaceOfDeath",
        "subject": "Dana Whitfield",
        "gold": [],
        "premises": [
            "Dana Whitfield lives in Toronto and hosts a weekly radio program.",
            "Whitfield interviews writers from around the world.",
        ],
        "fill_mask": [("Toronto", 0.15)],
        "entail": {"toronto": "RD"},
        "ner": [
            [("Dana Whitfield", "PER"), ("Toronto", "LOC")],
            [("Whitfield", "PER")],
        ],
        "qa": [(None, 1.0), (None, 1.0)],
        "relext": [[("Dana Whitfield", "residence", "Toronto")], []],
        "expect": [],
    },
    # -------------------------------------------------- CompanyParentOrganization
    {
        "relation": "CompanyParentOrganization",
        "subject": "Lumen Robotics",
        "gold": [["Apex Industrial Group"]],
        "premises": [
            "Apex Industrial Group acquired Lumen Robotics in 2019.",
            "Lumen Robotics operates as a subsidiary of Apex Industrial Group.",
            "Lumen Robotics builds warehouse automation systems.",
        ],
        "fill_mask": [("Apex Industrial Group", 0.25), ("investors", 0.10)],
        "entail": {"apex industrial group": "SSN", "lumen robotics": "RRR"},
        "ner": [
            [("Apex Industrial Group", "ORG"), ("Lumen Robotics", "ORG")],
            [("Lumen Robotics", "ORG"), ("Apex Industrial Group", "ORG")],
            [("Lumen Robotics", "ORG")],
        ],
        "qa": [("Apex Industrial Group", 0.90), ("Apex Industrial Group", 0.80), (None, 1.0)],
        "relext": [
            [("Apex Industrial Group", "owner of", "Lumen Robotics")],
            [("Lumen Robotics", "parent organization", "Apex Industrial Group")],
            [],
        ],
        "expect": ["Apex Industrial Group"],
    },
    {
        "relation": "CompanyParentOrganization",
        "subject": "Northgate Foods",
        "gold": [["Harvest Holdings"]],
        "premises": [
            "Harvest Holdings owns Northgate Foods.",
            "Northgate Foods was folded into Harvest Holdings a decade ago.",
            "Northgate Foods supplies regional grocers alongside Caldwell Group.",
        ],
        "fill_mask": [("Harvest Holdings", 0.22)],
        "entail": {"harvest holdings": "SSN", "northgate foods": "RRR", "caldwell group": "DDD"},
        "ner": [
            [("Harvest Holdings", "ORG"), ("Northgate Foods", "ORG")],
            [("Northgate Foods", "ORG"), ("Harvest Holdings", "ORG")],
            [("Northgate Foods", "ORG"), ("Caldwell Group", "ORG")],
        ],
        "qa": [("Harvest Holdings", 0.90), ("Harvest Holdings", 0.70), ("Caldwell Group", 0.35)],
        "relext": [
            [("Northgate Foods", "parent organization", "Harvest Holdings")],
            [],
            [],
        ],
        "expect": ["Harvest Holdings"],
    },
    {
        "relation": "CompanyParentOrganization",
        "subject": "Brightline Analytics",
        "gold": [],
        "premises": [
            "Brightline Analytics remains an independent firm.",
            "Brightline Analytics was founded by two statisticians.",
        ],
        "fill_mask": [("investors", 0.12)],
        "entail": {"brightline analytics": "RR"},
        "ner": [
            [("Brightline Analytics", "ORG")],
            [("Brightline Analytics", "ORG")],
        ],
        "qa": [(None, 1.0), (None, 1.0)],
        "relext": [[], []],
        "expect": [],
    },
    {
        "relation": "CompanyParentOrganization",
        "subject": "Cobalt Shipping",
        "gold": [["Meridian Transport Group"]],
        "premises": [
            "Meridian Transport Group is the parent company of Cobalt Shipping.",
            "Cobalt Shipping routes connect four continents.",
            "Cobalt Shipping competes with Atlas Freight on several routes.",
        ],
        "fill_mask": [("Meridian Transport Group", 0.20)],
        "entail": {"meridian transport group": "SNN", "cobalt shipping": "RRR", "atlas freight": "DDD"},
        "ner": [
            [("Meridian Transport Group", "ORG"), ("Cobalt Shipping", "ORG")],
            [("Cobalt Shipping", "ORG")],
            [("Cobalt Shipping", "ORG"), ("Atlas Freight", "ORG")],
        ],
        "qa": [("Meridian Transport Group", 0.90), (None, 1.0), ("Atlas Freight", 0.55)],
        "relext": [
            [("Cobalt Shipping", "parent organization", "Meridian Transport Group")],
            [],
            [],
        ],
        "expect": ["Meridian Transport Group"],
    },
    {
        "relation": "CompanyParentOrganization",
        "subject": "Veltex Pharma",
        "gold": [["Grupo Sandoval"]],
        "premises": [
            "Veltex Pharma is a subsidiary of Grupo Sandoval.",
            "Grupo Sandoval consolidated Veltex Pharma operations in Lima.",
            "Veltex Pharma develops generic antibiotics.",
        ],
        "fill_mask": [("Grupo Sandoval", 0.24)],
        "entail": {"grupo sandoval": "SSN", "veltex pharma": "RRR"},
        "ner": [
            [("Veltex Pharma", "ORG"), ("Grupo Sandoval", "ORG")],
            [("Grupo Sandoval", "ORG"), ("Veltex Pharma", "ORG"), ("Lima", "LOC")],
            [("Veltex Pharma", "ORG")],
        ],
        "qa": [("Grupo Sandoval", 0.90), ("Grupo Sandoval", 0.80), (None, 1.0)],
        "relext": [
            [("Veltex Pharma", "parent organization", "Grupo Sandoval")],
            [],
            [],
        ],
        "expect": ["Grupo Sandoval"],
    },
    {
        "relation": "CompanyParentOrganization",
        "subject": "Quill & Porter",
        "gold": [],
        "premises": [
            "Quill & Porter is an employee-owned publisher.",
            "Quill & Porter celebrated its centenary last year.",
        ],
        "fill_mask": [("shareholders", 0.11)],
        "entail": {"quill & porter": "RR"},
        "ner": [
            [("Quill & Porter", "ORG")],
            [("Quill & Porter", "ORG")],
        ],
        "qa": [(None, 1.0), (None, 1.0)],
        "relext": [[], []],
        "expect": [],
    },
]


def render(template: str, subject: str, obj: str | None = None) -> str:
    out = template.replace("{X}", subject)
    return out if obj is None else out.replace("{Y}", obj)


def schema_for(relation: str) -> dict:
    return next(r for r in RELATIONS["relations"] if r["name"] == relation)


def write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(dump_json_line(r) + "\n" for r in rows), encoding="utf-8")


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
                    encoding="utf-8")


def build_dataset() -> list[dict]:
    return [
        {"subject": e["subject"], "relation": e["relation"], "objects": e["gold"]}
        for e in WORLD
    ]


def build_premise_cache() -> list[dict]:
    rows = []
    for entry in WORLD:
        query = render(schema_for(entry["relation"])["t_search"], entry["subject"])
        if not entry["premises"]:
            rows.append({"query": query, "rank": 0, "title": "", "url": "",
                         "snippet": "", "retrieved_at": STAMP})
            continue
        for i, text in enumerate(entry["premises"], start=1):
            rows.append({
                "query": query,
                "rank": i,
                "title": f"{entry['subject']} result {i}",
                "url": f"https://fixture.test/{entry['subject'].replace(' ', '-').lower()}/{i}",
                "snippet": text,
                "retrieved_at": STAMP,
            })
    return rows


def build_search_fixture() -> list[dict]:
    out = []
    for entry in WORLD:
        query = render(schema_for(entry["relation"])["t_search"], entry["subject"])
        out.append({
            "query": query,
            "hits": [
                {
                    "title": f"{entry['subject']} result {i}",
                    "url": f"https://fixture.test/{entry['subject'].replace(' ', '-').lower()}/{i}",
                    "snippet": text,
                }
                for i, text in enumerate(entry["premises"], start=1)
            ],
        })
    return out


def build_fill_mask_fixture() -> list[dict]:
    out = []
    for entry in WORLD:
        prompt = render(schema_for(entry["relation"])["t_lm"], entry["subject"])
        out.append({
            "prompt": prompt,
            "results": [{"token": t, "score": s} for t, s in entry["fill_mask"]],
        })
    return out


def candidate_surfaces(entry: dict) -> list[str]:
    """Every surface the pipeline may turn into a hypothesis for this pair."""
    schema = schema_for(entry["relation"])
    surfaces: list[str] = [t for t, _ in entry["fill_mask"]]
    if "KG" in schema["sources"]:
        for cls in schema["range_classes"]:
            surfaces.extend(KG_INSTANCES.get(cls, []))
    for spans in entry.get("ner", []) or []:
        label_map = RELATIONS["ner_class_labels"]
        wanted = {label_map[c] for c in schema["range_classes"] if c in label_map}
        surfaces.extend(s for s, label in spans if label in wanted)
    seen, unique = set(), []
    for s in surfaces:
        if s not in seen:
            seen.add(s)
            unique.append(s)
    return unique


def build_entail_fixture() -> list[dict]:
    rows = []
    seen_keys = set()
    for entry in WORLD:
        schema = schema_for(entry["relation"])
        premises = entry["premises"]
        for surface in candidate_surfaces(entry):
            levels = entry["entail"].get(surface.strip().lower())
            hypothesis = render(schema["t_h"], entry["subject"], surface)
            for i, premise in enumerate(premises):
                level = levels[i] if levels else DEFAULT_LEVEL
                e, c, n = LEVELS[level]
                key = (premise, hypothesis)
                if key in seen_keys:
                    continue
                seen_keys.add(key)
                rows.append({
                    "premise": premise,
                    "hypothesis": hypothesis,
                    "entail": e,
                    "contradiction": c,
                    "neutral": n,
                })
    return rows


def build_ner_fixture() -> list[dict]:
    rows = []
    for entry in WORLD:
        for text, spans in zip(entry["premises"], entry.get("ner", []) or []):
            span_rows = []
            for surface, label in spans:
                start = text.index(surface)
                span_rows.append(
                    {"surface": surface, "label": label, "start": start,
                     "end": start + len(surface)}
                )
            rows.append({"text": text, "spans": span_rows})
    return rows


def build_qa_fixture() -> list[dict]:
    rows = []
    for entry in WORLD:
        question = render(schema_for(entry["relation"])["t_qa"], entry["subject"])
        for text, qa in zip(entry["premises"], entry["qa"]):
            answer, score = qa
            if answer is None:
                rows.append({"question": question, "context": text, "answer": "",
                             "score": score, "start": -1, "end": -1})
            else:
                start = text.index(answer)
                rows.append({"question": question, "context": text, "answer": answer,
                             "score": score, "start": start, "end": start + len(answer)})
    return rows


def build_relext_fixture() -> list[dict]:
    rows = []
    seen = set()
    for entry in WORLD:
        for text, triples in zip(entry["premises"], entry["relext"]):
            if text in seen:
                continue
            seen.add(text)
            rows.append({
                "text": text,
                "triples": [
                    {"subject": s, "relation": r, "object": o} for s, r, o in triples
                ],
            })
    return rows


def build_sparql_fixture() -> list[dict]:
    return [{"class": cls, "labels": labels} for cls, labels in KG_INSTANCES.items()]


def build_kg_cache() -> list[dict]:
    deduped = {}
    for cls, labels in KG_INSTANCES.items():
        seen, unique = set(), []
        for label in labels:
            key = label.strip().lower()
            if key not in seen:
                seen.add(key)
                unique.append(label)
        deduped[cls] = unique
    return [{"class": cls, "labels": labels} for cls, labels in deduped.items()]


RUN_CONFIG = {
    "relations": "relations.json",
    "dataset": "dataset.jsonl",
    "premise_cache": "premises.jsonl",
    "kg_cache": "kg_cache.jsonl",
    "relation_map": "../config/rebel_relation_map.json",
    "output_dir": "../out",
    "k": 3,
    "seed": 7,
    "backends": {"mode": "fixture", "fixtures_dir": "backends"},
}


def verify_and_build_golden() -> None:
    """Run the pipeline over the fresh corpus, assert the authored expectations,
    and refresh the golden prediction/evaluation files."""
    from click.testing import CliRunner

    from satori.cli import main as cli_main

    expected_by_pair = {
        (e["subject"], e["relation"]): e["expect"] for e in WORLD
    }

    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        config = dict(RUN_CONFIG)
        config["relations"] = str(FIXTURES / "relations.json")
        config["dataset"] = str(FIXTURES / "dataset.jsonl")
        config["premise_cache"] = str(FIXTURES / "premises.jsonl")
        config["kg_cache"] = str(FIXTURES / "kg_cache.jsonl")
        config["relation_map"] = str(REPO / "config" / "rebel_relation_map.json")
        config["output_dir"] = str(tmp_path / "out")
        config["backends"] = {"mode": "fixture", "fixtures_dir": str(BACKENDS)}
        config_path = tmp_path / "run_config.json"
        write_json(config_path, config)

        runner = CliRunner()
        for system in ("satori", "lm-baseline", "qa-baseline", "re-baseline"):
            result = runner.invoke(
                cli_main, ["predict", "--config", str(config_path), "--system", system,
                           "--jobs", "1"],
                catch_exceptions=False,
            )
            assert result.exit_code == 0, result.output
        result = runner.invoke(
            cli_main,
            ["evaluate", "--config", str(config_path),
             str(tmp_path / "out" / "predictions_satori.jsonl")],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output

        predictions = {}
        for line in (tmp_path / "out" / "predictions_satori.jsonl").read_text().splitlines():
            row = json.loads(line)
            predictions[(row["subject"], row["relation"])] = [
                o["surface"] for o in row["objects"]
            ]
        for pair, expected in expected_by_pair.items():
            got = predictions[pair]
            assert got == expected, f"{pair}: expected {expected}, pipeline produced {got}"

        report = json.loads((tmp_path / "out" / "eval_satori.json").read_text())
        overall_f1 = report["overall"]["f1"]
        assert abs(overall_f1 - 0.9777777777777779) < 1e-12, overall_f1

        GOLDEN.mkdir(parents=True, exist_ok=True)
        for name in (
            "predictions_satori.jsonl",
            "predictions_lm-baseline.jsonl",
            "predictions_qa-baseline.jsonl",
            "predictions_re-baseline.jsonl",
            "eval_satori.json",
            "eval_satori.txt",
        ):
            shutil.copyfile(tmp_path / "out" / name, GOLDEN / name)
    print(f"golden files refreshed; satori macro F1 = {overall_f1:.4f}")


def main() -> None:
    write_json(FIXTURES / "relations.json", RELATIONS)
    write_jsonl(FIXTURES / "dataset.jsonl", build_dataset())
    write_jsonl(FIXTURES / "premises.jsonl", build_premise_cache())
    write_jsonl(FIXTURES / "kg_cache.jsonl", build_kg_cache())
    write_json(BACKENDS / "search.json", build_search_fixture())
    write_json(BACKENDS / "fill_mask.json", build_fill_mask_fixture())
    write_json(BACKENDS / "entail.json", build_entail_fixture())
    write_json(BACKENDS / "ner.json", build_ner_fixture())
    write_json(BACKENDS / "qa.json", build_qa_fixture())
    write_json(BACKENDS / "relext.json", build_relext_fixture())
    write_json(BACKENDS / "sparql.json", build_sparql_fixture())
    write_json(FIXTURES / "run_config.json", RUN_CONFIG)
    print(f"fixture corpus written under {FIXTURES}")
    verify_and_build_golden()


if __name__ == "__main__":
    main()
