import json
import re
from pathlib import Path

import pytest

from mixdistill.cli import main

REPO = Path(__file__).parent.parent
MOCK_CONFIG = str(REPO / "configs" / "mock.yaml")
GOLDENS = Path(__file__).parent / "goldens"


def _strip_timing(text: str) -> str:
    return re.sub(r'"exec_wall_ms": \d+', '"exec_wall_ms": 0', text)


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("mockrun")
    assert main(["pipeline", "--config", MOCK_CONFIG, "--out", str(out)]) == 0
    return out


class TestPipeline:
    def test_offline_accuracy_is_hand_computed_75(self, pipeline_run):
        scores = json.loads((pipeline_run / "svamp" / "scores.json").read_text())
        assert scores["accuracy"]["combined"] == 75.0  # 6 of 8
        assert scores["accuracy"]["cot"] == 50.0
        assert scores["accuracy"]["pot"] == 62.5

    def test_report_matches_pinned_goldens(self, pipeline_run):
        for golden in sorted(GOLDENS.iterdir()):
            produced = pipeline_run / "report" / golden.name
            assert produced.read_bytes() == golden.read_bytes(), golden.name

    def test_stage_artifacts_present(self, pipeline_run):
        d = pipeline_run / "svamp"
        for name in (
            "generations.jsonl",
            "paths.jsonl",
            "filter_report.json",
            "train.jsonl",
            "build_manifest.json",
            "predictions.jsonl",
            "scores.json",
            "run_meta.json",
        ):
            assert (d / name).exists(), name

    def test_rerun_is_noop(self, pipeline_run, capsys):
        before = (pipeline_run / "svamp" / "predictions.jsonl").read_bytes()
        assert main(["pipeline", "--config", MOCK_CONFIG, "--out", str(pipeline_run)]) == 0
        out = capsys.readouterr().out
        assert out.count("up to date") >= 5
        assert (pipeline_run / "svamp" / "predictions.jsonl").read_bytes() == before

    def test_fresh_run_reproduces_bytes(self, pipeline_run, tmp_path):
        out2 = tmp_path / "again"
        assert main(["pipeline", "--config", MOCK_CONFIG, "--out", str(out2)]) == 0
        for path in sorted(pipeline_run.rglob("*")):
            if path.is_dir() or "cache" in path.parts:
                continue
            twin = out2 / path.relative_to(pipeline_run)
            if path.name.endswith(".manifest.json"):
                continue  # inputs hash covers paths.jsonl, which carries timings
            a = _strip_timing(path.read_text(encoding="utf-8"))
            b = _strip_timing(twin.read_text(encoding="utf-8"))
            assert a == b, path.name

    def test_filter_report_counts(self, pipeline_run):
        report = json.loads((pipeline_run / "svamp" / "filter_report.json").read_text())
        # per the teacher script: one accepted + one crafted reject per problem per mode
        assert report["total"] == 32
        assert report["accepted"] == 16
        assert report["rejections"]["ExecError"] == 8
        assert report["rejections"]["NoAnswer"] == 7
        assert report["rejections"]["GoldMismatch"] == 1


class TestStageGating:
    def test_infer_before_build_exits_3(self, tmp_path):
        code = main(["infer", "--config", MOCK_CONFIG, "--out", str(tmp_path / "x")])
        assert code == 3

    def test_endpoint_override_waives_build_dependency(self, tmp_path):
        from mixdistill.mock_endpoint import MockEndpoint, MockScript

        script = MockScript.from_file(REPO / "fixtures" / "mock" / "student_script.json")
        with MockEndpoint(script) as server:
            code = main(
                [
                    "infer",
                    "--config",
                    MOCK_CONFIG,
                    "--out",
                    str(tmp_path / "y"),
                    "--endpoint",
                    server.base_url,
                ]
            )
        assert code == 0
        assert (tmp_path / "y" / "svamp" / "predictions.jsonl").exists()

    def test_eval_before_infer_exits_3(self, tmp_path):
        assert main(["eval", "--config", MOCK_CONFIG, "--out", str(tmp_path / "z")]) == 3

    def test_filter_before_extract_exits_3(self, tmp_path):
        assert main(["filter", "--config", MOCK_CONFIG, "--out", str(tmp_path / "w")]) == 3


class TestConfigHandling:
    def test_missing_config_exits_2(self, tmp_path):
        assert main(["build", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_invalid_yaml_exits_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("label: [unclosed")
        assert main(["build", "--config", str(bad)]) == 2

    def test_unknown_dataset_filter_exits_2(self, tmp_path):
        assert main(["pipeline", "--config", MOCK_CONFIG, "--out", str(tmp_path), "--dataset", "gsm8k"]) == 2

    def test_lambda_recorded_in_manifest(self, pipeline_run, tmp_path):
        out = tmp_path / "lam"
        assert main(["extract", "--config", MOCK_CONFIG, "--out", str(out)]) == 0
        assert main(["filter", "--config", MOCK_CONFIG, "--out", str(out)]) == 0
        assert main(["build", "--config", MOCK_CONFIG, "--out", str(out), "--mode", "mixed", "--lambda", "0.5"]) == 0
        manifest = json.loads((out / "svamp" / "build_manifest.json").read_text())
        assert manifest["lambda"] == 0.5
        assert manifest["mode"] == "mixed"

    def test_lambda_out_of_range_exits_2(self, tmp_path):
        out = tmp_path / "lam2"
        assert main(["build", "--config", MOCK_CONFIG, "--out", str(out), "--lambda", "1.5"]) == 2
