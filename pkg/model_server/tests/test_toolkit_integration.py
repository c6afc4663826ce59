"""End-to-end: the KBP toolkit's CLI predicting through this live server.

Model capabilities are routed over HTTP to the tiny-checkpoint server while
search and the knowledge graph stay on the toolkit's shipped fixtures. The
tiny models know nothing, so predictions are not meaningful; what this
verifies is that the whole wire path (run config, per-capability routing,
retries, response validation, output schema) holds together.
"""

from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from satori.cli import main as toolkit_cli

REPO_ROOT = Path(__file__).resolve().parent.parent.parent
FIXTURES = REPO_ROOT / "fixtures"


def test_toolkit_predicts_through_live_server(server_url, tmp_path):
    config = {
        "relations": str(FIXTURES / "relations.json"),
        "dataset": str(FIXTURES / "dataset.jsonl"),
        "premise_cache": str(FIXTURES / "premises.jsonl"),
        "kg_cache": str(FIXTURES / "kg_cache.jsonl"),
        "output_dir": str(tmp_path / "out"),
        "k": 3,
        "backends": {
            "mode": "http",
            "fixtures_dir": str(FIXTURES / "backends"),
            "capability_modes": {"search": "fixture", "kg": "fixture"},
            "endpoints": {
                capability: server_url
                for capability in ("mask_fill", "entailment", "ner", "qa", "relext")
            },
        },
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    runner = CliRunner()
    result = runner.invoke(
        toolkit_cli,
        ["predict", "--config", str(config_path), "--relation", "PersonInstrument"],
    )
    assert result.exit_code == 0, result.output
    rows = [
        json.loads(line)
        for line in (tmp_path / "out" / "predictions_satori.jsonl").read_text().splitlines()
    ]
    assert len(rows) == 6
    for row in rows:
        assert row["system"] == "satori"
        for obj in row["objects"]:  # whatever the random model accepted is wire-valid
            assert obj["surface"]
            assert obj["sources"]
            assert obj["mean_entailment"] is None or 0.0 <= obj["mean_entailment"] <= 1.0

    result = runner.invoke(
        toolkit_cli,
        ["predict", "--config", str(config_path), "--system", "qa-baseline",
         "--relation", "PersonInstrument"],
    )
    assert result.exit_code == 0, result.output
