from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from satori.cli import RunConfig, main
from satori.core import ConfigError

from conftest import CONFIG_DIR, FIXTURES_DIR


def write_config(tmp_path: Path, **overrides) -> Path:
    config = {
        "relations": str(FIXTURES_DIR / "relations.json"),
        "dataset": str(FIXTURES_DIR / "dataset.jsonl"),
        "premise_cache": str(FIXTURES_DIR / "premises.jsonl"),
        "kg_cache": str(FIXTURES_DIR / "kg_cache.jsonl"),
        "relation_map": str(CONFIG_DIR / "rebel_relation_map.json"),
        "output_dir": str(tmp_path / "out"),
        "k": 3,
        "seed": 7,
        "backends": {"mode": "fixture", "fixtures_dir": str(FIXTURES_DIR / "backends")},
    }
    config.update(overrides)
    path = tmp_path / "run_config.json"
    path.write_text(json.dumps(config))
    return path


@pytest.fixture()
def runner():
    return CliRunner()


class TestRunConfig:
    def test_loads_and_resolves(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path))
        assert config.k == 3
        assert config.dataset.exists()

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "nope.json")

    def test_missing_dataset_path(self, tmp_path):
        path = write_config(tmp_path, dataset=str(tmp_path / "ghost.jsonl"))
        with pytest.raises(ConfigError, match="dataset"):
            RunConfig.load(path)

    def test_bad_k(self, tmp_path):
        path = write_config(tmp_path, k=0)
        with pytest.raises(ConfigError, match="k must be"):
            RunConfig.load(path)

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "data").mkdir()
        (tmp_path / "data" / "d.jsonl").write_text(
            '{"subject": "s", "relation": "PersonInstrument", "objects": []}\n'
        )
        path = write_config(tmp_path, dataset="data/d.jsonl")
        config = RunConfig.load(path)
        assert config.dataset == (tmp_path / "data" / "d.jsonl").resolve()

    def test_config_error_exit_code_is_2(self, runner, tmp_path):
        path = write_config(tmp_path, dataset=str(tmp_path / "ghost.jsonl"))
        result = runner.invoke(main, ["predict", "--config", str(path)])
        assert result.exit_code == 2

    def test_fatal_error_exit_code_is_1(self, runner, tmp_path):
        path = write_config(tmp_path)
        stray = tmp_path / "stray.jsonl"
        stray.write_text(
            '{"subject": "Nobody", "relation": "PersonInstrument", "objects": [], "system": "satori"}\n'
        )
        result = runner.invoke(main, ["evaluate", "--config", str(path), str(stray)])
        assert result.exit_code == 1  # prediction for a pair absent from the dataset


class TestPredictCommand:
    def test_satori_matches_golden(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(main, ["predict", "--config", str(path), "--jobs", "1"])
        assert result.exit_code == 0, result.output
        produced = (tmp_path / "out" / "predictions_satori.jsonl").read_bytes()
        golden = (FIXTURES_DIR / "golden" / "predictions_satori.jsonl").read_bytes()
        assert produced == golden

    def test_parallel_output_is_identical(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(main, ["predict", "--config", str(path), "--jobs", "4"])
        assert result.exit_code == 0, result.output
        produced = (tmp_path / "out" / "predictions_satori.jsonl").read_bytes()
        golden = (FIXTURES_DIR / "golden" / "predictions_satori.jsonl").read_bytes()
        assert produced == golden

    def test_missing_premise_cache_names_fetch_premises(self, runner, tmp_path):
        path = write_config(tmp_path, premise_cache=str(tmp_path / "nocache.jsonl"))
        result = runner.invoke(main, ["predict", "--config", str(path)])
        assert result.exit_code == 2
        assert "fetch-premises" in result.output

    def test_relation_filter(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main,
            ["predict", "--config", str(path), "--relation", "CountryOfficialLanguage"],
        )
        assert result.exit_code == 0, result.output
        rows = [
            json.loads(line)
            for line in (tmp_path / "out" / "predictions_satori.jsonl").read_text().splitlines()
        ]
        assert len(rows) == 6
        assert {r["relation"] for r in rows} == {"CountryOfficialLanguage"}

    def test_explain_includes_verdicts(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main,
            ["predict", "--config", str(path), "--relation", "PersonInstrument", "--explain"],
        )
        assert result.exit_code == 0, result.output
        row = json.loads(
            (tmp_path / "out" / "predictions_satori.jsonl").read_text().splitlines()[0]
        )
        assert "verdicts" in row
        drums = next(v for v in row["verdicts"] if v["triple"]["object"] == "drums")
        assert drums["status"] == "REJECTED"
        assert len(drums["per_premise"]) == 3

    def test_manifest_written(self, runner, tmp_path):
        path = write_config(tmp_path)
        runner.invoke(main, ["predict", "--config", str(path)])
        manifest = json.loads((tmp_path / "out" / "manifest_predict-satori.json").read_text())
        assert manifest["backend_mode"] == "fixture"
        assert manifest["config_sha256"]


class TestFetchPremisesCommand:
    def test_fetch_into_fresh_cache_matches_shipped(self, runner, tmp_path):
        cache_path = tmp_path / "premises.jsonl"
        path = write_config(tmp_path, premise_cache=str(cache_path))
        result = runner.invoke(main, ["fetch-premises", "--config", str(path)])
        assert result.exit_code == 0, result.output
        produced = cache_path.read_bytes()
        shipped = (FIXTURES_DIR / "premises.jsonl").read_bytes()
        # Identical modulo the retrieval timestamps.
        def scrub(data: bytes) -> list:
            rows = [json.loads(line) for line in data.decode().splitlines()]
            for row in rows:
                row["retrieved_at"] = "X"
            return rows

        assert scrub(produced) == scrub(shipped)


class TestEvaluateCommand:
    def test_matches_golden_report(self, runner, tmp_path):
        path = write_config(tmp_path)
        runner.invoke(main, ["predict", "--config", str(path)])
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(path), str(tmp_path / "out" / "predictions_satori.jsonl")],
        )
        assert result.exit_code == 0, result.output
        for name in ("eval_satori.json", "eval_satori.txt"):
            produced = (tmp_path / "out" / name).read_bytes()
            golden = (FIXTURES_DIR / "golden" / name).read_bytes()
            assert produced == golden, f"{name} differs from golden"

    def test_pooled_flag_adds_overall(self, runner, tmp_path):
        path = write_config(tmp_path)
        runner.invoke(main, ["predict", "--config", str(path)])
        result = runner.invoke(
            main,
            ["evaluate", "--config", str(path),
             str(tmp_path / "out" / "predictions_satori.jsonl"), "--pooled", "--csv"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "out" / "eval_satori.json").read_text())
        assert "pooled_overall" in report
        assert (tmp_path / "out" / "eval_satori.csv").exists()


class TestCalibrateCommand:
    def test_calibrate_then_predict_uses_overlay(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main,
            ["calibrate", "--config", str(path), "--system", "satori",
             "--relation", "PersonInstrument"],
        )
        assert result.exit_code == 0, result.output
        overlay_path = tmp_path / "out" / "thresholds_satori.json"
        overlay = json.loads(overlay_path.read_text())
        assert "PersonInstrument" in overlay
        assert set(overlay["PersonInstrument"]) == {"T_lm", "T_e"}

        result = runner.invoke(
            main,
            ["predict", "--config", str(path), "--relation", "PersonInstrument",
             "--thresholds", str(overlay_path)],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "out" / "manifest_predict-satori.json").read_text())
        assert manifest["overlay_values"] == overlay
        # Calibrated thresholds on this corpus reject the honest false
        # positive "chess" that the shipped thresholds accept.
        rows = [
            json.loads(line)
            for line in (tmp_path / "out" / "predictions_satori.jsonl").read_text().splitlines()
        ]
        vasquez = next(r for r in rows if r["subject"] == "Elena Vasquez")
        assert [o["surface"] for o in vasquez["objects"]] == ["cello"]

    def test_calibrate_lm_baseline(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main, ["calibrate", "--config", str(path), "--system", "lm-baseline"]
        )
        assert result.exit_code == 0, result.output
        overlay = json.loads((tmp_path / "out" / "thresholds_lm-baseline.json").read_text())
        assert all(set(v) == {"T_lm"} for v in overlay.values())


class TestTraingenCommand:
    @pytest.mark.parametrize("kind", ["mlm", "entailment", "qa", "re"])
    def test_deterministic_across_runs(self, runner, tmp_path, kind):
        path = write_config(tmp_path)
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        for out in (out1, out2):
            result = runner.invoke(
                main,
                ["traingen", "--config", str(path), "--kind", kind, "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.stat().st_size > 0


class TestMixedBackendModes:
    def test_http_capability_override_reproduces_golden(self, runner, tmp_path):
        """Routing one capability over HTTP (to a stub serving the same fixture
        tables) must not change the predictions at all."""
        from satori.backends.fixture import load_fixture_backends
        from stubs import BackendHTTPServer

        suite = load_fixture_backends(FIXTURES_DIR / "backends")
        with BackendHTTPServer(suite) as server:
            path = write_config(
                tmp_path,
                backends={
                    "mode": "fixture",
                    "fixtures_dir": str(FIXTURES_DIR / "backends"),
                    "capability_modes": {"entailment": "http", "mask_fill": "http"},
                    "endpoints": {
                        "entailment": server.base_url,
                        "mask_fill": server.base_url,
                    },
                },
            )
            result = runner.invoke(main, ["predict", "--config", str(path)])
            assert result.exit_code == 0, result.output
        produced = (tmp_path / "out" / "predictions_satori.jsonl").read_bytes()
        golden = (FIXTURES_DIR / "golden" / "predictions_satori.jsonl").read_bytes()
        assert produced == golden
        manifest = json.loads((tmp_path / "out" / "manifest_predict-satori.json").read_text())
        assert manifest["backend_modes"]["entailment"] == "http"
        assert manifest["backend_modes"]["search"] == "fixture"

    def test_unknown_capability_mode_is_config_error(self, runner, tmp_path):
        path = write_config(
            tmp_path,
            backends={
                "mode": "fixture",
                "fixtures_dir": str(FIXTURES_DIR / "backends"),
                "capability_modes": {"teleport": "http"},
            },
        )
        result = runner.invoke(main, ["predict", "--config", str(path)])
        assert result.exit_code == 2

    def test_http_mode_without_endpoint_is_config_error(self, runner, tmp_path):
        path = write_config(
            tmp_path,
            backends={
                "mode": "fixture",
                "fixtures_dir": str(FIXTURES_DIR / "backends"),
                "capability_modes": {"entailment": "http"},
            },
        )
        result = runner.invoke(main, ["predict", "--config", str(path)])
        assert result.exit_code == 2
        assert "endpoints" in result.output


class TestSharedPremiseCache:
    def test_all_systems_reuse_the_same_cache_keys(self, runner, tmp_path):
        """Every system reads the identical premise cache; nothing new is fetched
        or appended, so no command mutates its inputs."""
        import shutil

        cache_copy = tmp_path / "premises.jsonl"
        shutil.copyfile(FIXTURES_DIR / "premises.jsonl", cache_copy)
        before = cache_copy.read_bytes()
        path = write_config(tmp_path, premise_cache=str(cache_copy))
        for system in ("satori", "lm-baseline", "qa-baseline", "re-baseline"):
            result = runner.invoke(main, ["predict", "--config", str(path), "--system", system])
            assert result.exit_code == 0, result.output
        assert cache_copy.read_bytes() == before

    def test_shipped_inputs_untouched_by_full_run(self, runner, tmp_path):
        fingerprints = {
            p: p.read_bytes()
            for p in (
                FIXTURES_DIR / "premises.jsonl",
                FIXTURES_DIR / "dataset.jsonl",
                FIXTURES_DIR / "relations.json",
                FIXTURES_DIR / "kg_cache.jsonl",
            )
        }
        path = write_config(tmp_path)
        runner.invoke(main, ["predict", "--config", str(path)])
        runner.invoke(
            main,
            ["evaluate", "--config", str(path), str(tmp_path / "out" / "predictions_satori.jsonl")],
        )
        for p, before in fingerprints.items():
            assert p.read_bytes() == before, f"{p.name} was mutated by a command"


class TestRegimeCommand:
    def test_regime_over_fixture_corpus(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main,
            ["regime", "--config", str(path), "--system", "lm-baseline",
             "--fraction", "0.5", "--repetitions", "2", "--seed", "1"],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads((tmp_path / "out" / "regime_lm-baseline.json").read_text())
        assert payload["spec"] == {"fraction": 0.5, "repetitions": 2, "seed": 1}
        assert len(payload["repetitions"]) == 2
        assert all(sizes == {"PersonInstrument": 3, "CountryOfficialLanguage": 3,
                             "PersonPlaceOfDeath": 3, "CompanyParentOrganization": 3}
                   for sizes in payload["sample_sizes"])

    def test_fraction_one_without_eval_dataset_is_config_error(self, runner, tmp_path):
        path = write_config(tmp_path)
        result = runner.invoke(
            main, ["regime", "--config", str(path), "--fraction", "1.0"]
        )
        assert result.exit_code == 2
