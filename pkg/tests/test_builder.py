import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdistill.builder import (
    BuildMode,
    DistillRecord,
    Selection,
    build,
    read_records_jsonl,
    write_records_jsonl,
)
from mixdistill.core import Answer, Dataset, Mode, PathStatus, Problem, ReasoningPath
from mixdistill.errors import EmptyCorpus
from mixdistill.prompts import COT_CUE, POT_CUE


def _corpus(n_problems=10, paths_per_mode=1):
    problems, accepted = [], []
    for i in range(n_problems):
        pid = f"p{i:02d}"
        problems.append(Problem(pid, Dataset.SVAMP, f"What is {i} + 1?", Answer.numeric(i + 1)))
        for j in range(paths_per_mode):
            accepted.append(
                ReasoningPath(
                    pid, Mode.COT, f"Adding gives {i} + 1 = {i + 1}. The answer is {i + 1}.",
                    Answer.numeric(i + 1), PathStatus.OK,
                )
            )
            accepted.append(
                ReasoningPath(
                    pid, Mode.POT, f"value = {i}\nanswer = value + 1",
                    Answer.numeric(i + 1), PathStatus.OK, exec_wall_ms=5 + j,
                )
            )
    return problems, accepted


class TestBuildModes:
    def test_mixed_lambda_zero_zeroes_pot(self):
        problems, accepted = _corpus()
        records, _ = build(accepted, problems, BuildMode.MIXED, lambda_=0.0)
        assert all(r.weight == 0.0 for r in records if r.task == "pot")
        assert all(r.weight == 1.0 for r in records if r.task == "cot")

    def test_mixed_balanced(self):
        problems, accepted = _corpus(n_problems=10)
        records, manifest = build(accepted, problems, BuildMode.MIXED, lambda_=0.5)
        assert manifest.counts == {"cot": 10, "pot": 10}
        assert all(r.weight == 0.5 for r in records)

    def test_label_mode_count_equals_problem_count(self):
        problems, accepted = _corpus(n_problems=7)
        records, manifest = build(accepted, problems, BuildMode.LABEL)
        assert len(records) == 7
        assert manifest.counts == {"label": 7}
        assert all(r.task == "label" and r.weight == 1.0 for r in records)
        assert records[0].input == problems[0].question  # bare question, no cue

    def test_label_mode_over_full_svamp_train(self, official_root):
        from mixdistill.core import Dataset
        from mixdistill.datasets import Split, load_dataset

        train = load_dataset(Dataset.SVAMP, Split.TRAIN, official_root / "svamp/train.json")
        records, _ = build([], list(train.problems), BuildMode.LABEL)
        assert len(records) == 700  # one record per problem with gold

    def test_single_mode_weight_one(self):
        problems, accepted = _corpus()
        for mode, task in ((BuildMode.COT_ONLY, "cot"), (BuildMode.POT_ONLY, "pot")):
            records, _ = build(accepted, problems, mode)
            assert {r.task for r in records} == {task}
            assert all(r.weight == 1.0 for r in records)

    def test_lambda_out_of_range(self):
        problems, accepted = _corpus(2)
        with pytest.raises(ValueError):
            build(accepted, problems, BuildMode.MIXED, lambda_=1.5)

    def test_empty_corpus(self):
        problems, accepted = _corpus(2)
        cot_only = [p for p in accepted if p.mode is Mode.COT]
        with pytest.raises(EmptyCorpus):
            build(cot_only, problems, BuildMode.POT_ONLY)
        with pytest.raises(EmptyCorpus):
            build(cot_only, problems, BuildMode.MIXED)
        with pytest.raises(EmptyCorpus):
            build([], [], BuildMode.LABEL)


class TestRecordShape:
    def test_inputs_end_with_cue(self):
        problems, accepted = _corpus(3)
        records, _ = build(accepted, problems, BuildMode.MIXED)
        for record in records:
            cue = COT_CUE if record.task == "cot" else POT_CUE
            assert record.input.endswith(cue)

    def test_targets_carry_canonical_answer_line(self):
        problems, accepted = _corpus(3)
        records, _ = build(accepted, problems, BuildMode.MIXED)
        for record in records:
            last = record.target.splitlines()[-1]
            if record.task == "cot":
                assert last.startswith("The answer is ")
            else:
                assert last.startswith("answer = ")

    def test_no_cue_in_targets(self):
        problems, accepted = _corpus(3)
        echoing = [
            ReasoningPath(
                "p00", Mode.COT, f"{COT_CUE}\nSum is 1. The answer is 1.",
                Answer.numeric(1), PathStatus.OK,
            )
        ]
        records, _ = build(accepted + echoing, problems, BuildMode.MIXED, selection=Selection.ALL)
        assert all(COT_CUE not in r.target and POT_CUE not in r.target for r in records)

    def test_boolean_pot_target_is_python_literal(self):
        problem = Problem("s1", Dataset.STRATEGYQA, "Is two more than one?", Answer.boolean(True))
        path = ReasoningPath(
            "s1", Mode.POT, "# two exceeds one\nanswer = 2 > 1",
            Answer.boolean(True), PathStatus.OK, exec_wall_ms=2,
        )
        records, _ = build([path], [problem], BuildMode.POT_ONLY)
        assert records[0].target.splitlines()[-1] == "answer = True"

    def test_deterministic_order(self):
        problems, accepted = _corpus(5)
        a, _ = build(accepted, problems, BuildMode.MIXED)
        b, _ = build(list(reversed(accepted)), problems, BuildMode.MIXED)
        assert [(r.problem_id, r.task) for r in a] == [(r.problem_id, r.task) for r in b]

    def test_record_invariants_enforced(self):
        with pytest.raises(ValueError):
            DistillRecord("p", "no cue here", "t", "cot", 1.0)
        with pytest.raises(ValueError):
            DistillRecord("p", f"q\n{COT_CUE}", f"target with {COT_CUE}", "cot", 1.0)


class TestSelection:
    def test_first_takes_earliest_accepted(self):
        problems, accepted = _corpus(2, paths_per_mode=3)
        records, _ = build(accepted, problems, BuildMode.MIXED, selection=Selection.FIRST)
        assert len(records) == 2 * 2
        pot = [r for r in records if r.task == "pot" and r.problem_id == "p00"]
        assert len(pot) == 1

    def test_all_keeps_everything(self):
        problems, accepted = _corpus(2, paths_per_mode=3)
        records, _ = build(accepted, problems, BuildMode.MIXED, selection=Selection.ALL)
        assert len(records) == 2 * 2 * 3

    def test_best_n(self):
        problems, accepted = _corpus(2, paths_per_mode=3)
        records, _ = build(accepted, problems, BuildMode.MIXED, selection=Selection.BEST_N, best_n=2)
        assert len(records) == 2 * 2 * 2


class TestMixIdentityAndRoundTrip:
    @given(lam=st.floats(min_value=0, max_value=1, allow_nan=False))
    @settings(max_examples=40, deadline=None)
    def test_affine_mix_identity(self, lam):
        problems, accepted = _corpus(4)
        records, _ = build(accepted, problems, BuildMode.MIXED, lambda_=lam)
        by_problem: dict = {}
        for record in records:
            by_problem.setdefault(record.problem_id, 0.0)
            by_problem[record.problem_id] += record.weight
        assert all(abs(total - 1.0) < 1e-12 for total in by_problem.values())

    def test_jsonl_round_trip_byte_identical(self, tmp_path):
        problems, accepted = _corpus(6)
        records, _ = build(accepted, problems, BuildMode.MIXED, lambda_=0.3)
        out = tmp_path / "train.jsonl"
        write_records_jsonl(records, out)
        first_bytes = out.read_bytes()
        parsed = read_records_jsonl(out)
        assert parsed == records
        write_records_jsonl(parsed, out)
        assert out.read_bytes() == first_bytes

    def test_manifest_hash_stable(self):
        problems, accepted = _corpus(3)
        _, m1 = build(accepted, problems, BuildMode.MIXED)
        _, m2 = build(accepted, problems, BuildMode.MIXED)
        assert m1.source_hash == m2.source_hash


class TestResample:
    def test_quarter_lambda_exact_ratio(self):
        from mixdistill.builder import resample_records

        problems, accepted = _corpus(4)
        records, _ = build(accepted, problems, BuildMode.MIXED, lambda_=0.25)
        flat = resample_records(records, granularity=4)
        assert all(r.weight == 1.0 for r in flat)
        counts = {"cot": 0, "pot": 0}
        for record in flat:
            counts[record.task] += 1
        assert counts == {"cot": 4 * 3, "pot": 4 * 1}  # 0.75 : 0.25 mixture

    def test_zero_weight_records_dropped(self):
        from mixdistill.builder import resample_records

        problems, accepted = _corpus(2)
        records, _ = build(accepted, problems, BuildMode.MIXED, lambda_=0.0)
        flat = resample_records(records, granularity=2)
        assert {r.task for r in flat} == {"cot"}

    def test_via_cli_flag(self, tmp_path):
        from mixdistill.cli import main

        repo = __import__("pathlib").Path(__file__).parent.parent
        out = tmp_path / "rs"
        config = str(repo / "configs" / "mock.yaml")
        assert main(["extract", "--config", config, "--out", str(out)]) == 0
        assert main(["filter", "--config", config, "--out", str(out)]) == 0
        assert main(["build", "--config", config, "--out", str(out), "--resample", "2"]) == 0
        records = read_records_jsonl(out / "svamp" / "train.jsonl")
        assert all(r.weight == 1.0 for r in records)
