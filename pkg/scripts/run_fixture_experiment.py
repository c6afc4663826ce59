#!/usr/bin/env python3
"""End-to-end demo over the shipped fixture corpus, all through the CLI.

Fetches premises into a fresh cache, runs the pipeline and all three
baselines, evaluates everything, calibrates thresholds, re-predicts with
them, generates the four fine-tuning datasets, and runs a small sampling
experiment. Outputs land in out/.

Run from the repository root:  python scripts/run_fixture_experiment.py
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "out"
FIXTURES = REPO / "fixtures"


def satori(*args: str) -> None:
    cmd = [sys.executable, "-m", "satori.cli", *args]
    print("$", " ".join(str(a) for a in cmd[2:]), flush=True)
    subprocess.run(cmd, check=True, cwd=REPO)


def main() -> None:
    OUT.mkdir(exist_ok=True)
    config = {
        "relations": str(FIXTURES / "relations.json"),
        "dataset": str(FIXTURES / "dataset.jsonl"),
        "premise_cache": str(OUT / "premises.jsonl"),
        "kg_cache": str(OUT / "kg_cache.jsonl"),
        "relation_map": str(REPO / "config" / "rebel_relation_map.json"),
        "output_dir": str(OUT),
        "k": 3,
        "seed": 7,
        "backends": {"mode": "fixture", "fixtures_dir": str(FIXTURES / "backends")},
    }
    config_path = OUT / "demo_config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")

    satori("fetch-premises", "--config", str(config_path))
    for system in ("satori", "lm-baseline", "qa-baseline", "re-baseline"):
        satori("predict", "--config", str(config_path), "--system", system)
        satori(
            "evaluate", "--config", str(config_path),
            str(OUT / f"predictions_{system}.jsonl"), "--csv",
        )

    satori("calibrate", "--config", str(config_path), "--system", "satori")
    satori(
        "predict", "--config", str(config_path), "--system", "satori",
        "--thresholds", str(OUT / "thresholds_satori.json"),
        "--out", str(OUT / "predictions_satori_calibrated.jsonl"),
    )
    satori(
        "evaluate", "--config", str(config_path),
        str(OUT / "predictions_satori_calibrated.jsonl"),
        "--out-prefix", str(OUT / "eval_satori_calibrated"),
    )

    for kind in ("mlm", "entailment", "qa", "re"):
        satori("traingen", "--config", str(config_path), "--kind", kind)

    satori(
        "regime", "--config", str(config_path), "--system", "lm-baseline",
        "--fraction", "0.5", "--repetitions", "3",
    )

    print(f"\nAll outputs written under {OUT}")


if __name__ == "__main__":
    main()
