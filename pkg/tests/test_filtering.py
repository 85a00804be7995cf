import random

import pytest

from mixdistill.core import Answer, AnswerKind, Dataset, Mode, PathStatus, Problem, answers_equivalent
from mixdistill.filtering import (
    FilterPolicy,
    FilterReport,
    RejectReason,
    classify_generations,
    extract_cot_answer,
    filter_paths,
)
from mixdistill.sandbox import ExecLimits

FAST = ExecLimits(wall_timeout_ms=1500)


def _problem(gold=12, pid="p1"):
    return Problem(pid, Dataset.SVAMP, "Tom had 5 marbles and found 7 more. How many now?", Answer.numeric(gold))


# The 12-generation crafted corpus: 4 good, 3 with no extractable answer,
# 3 execution errors, 2 gold mismatches (gold answer is 12).
def twelve_generation_fixture():
    p = _problem()
    return [
        (p, Mode.COT, "Tom starts with 5 and finds 7, so 5 + 7 = 12. The answer is 12."),
        (p, Mode.COT, "He ends up with twelve marbles. The answer is 12."),
        (p, Mode.POT, "start = 5\nfound = 7\nanswer = start + found"),
        (p, Mode.POT, "answer = 5 + 7"),
        (p, Mode.COT, "I cannot solve this."),
        (p, Mode.COT, "There is not enough information to decide."),
        (p, Mode.POT, "answer = 'not sure'"),
        (p, Mode.POT, "answer = 1/0"),
        (p, Mode.POT, "import not_a_real_module_xyz\nanswer = 1"),
        (p, Mode.POT, "def broken(:"),
        (p, Mode.COT, "So 5 + 7 = 13. The answer is 13."),
        (p, Mode.POT, "answer = 100"),
    ]


class TestExtractCotAnswer:
    def test_pattern_case(self):
        ans = extract_cot_answer("so 7+5=12. The answer is 12.", AnswerKind.NUMERIC)
        assert ans == Answer.numeric(12)

    def test_no_answer_present(self):
        assert extract_cot_answer("I cannot solve this.", AnswerKind.NUMERIC).kind is AnswerKind.NONE

    def test_last_number_fallback(self):
        # stated fallback rule applied by hand: last number wins
        ans = extract_cot_answer("He has 9 left, then buys 3.", AnswerKind.NUMERIC)
        assert ans == Answer.numeric(3)

    def test_last_occurrence_of_marker_wins(self):
        text = "The answer is 4. Wait, recompute: 5 + 7. The answer is 12."
        assert extract_cot_answer(text, AnswerKind.NUMERIC) == Answer.numeric(12)

    def test_boolean_marker(self):
        assert extract_cot_answer("Snails are slow. The answer is no.", AnswerKind.BOOLEAN) == Answer.boolean(False)

    def test_boolean_fallback_last_token(self):
        ans = extract_cot_answer("Probably yes... although no.", AnswerKind.BOOLEAN)
        assert ans == Answer.boolean(False)

    def test_thousands_in_marker(self):
        ans = extract_cot_answer("The answer is $1,750.", AnswerKind.NUMERIC)
        assert ans == Answer.numeric(1750)

    def test_custom_pattern_priority(self):
        policy = FilterPolicy(cot_answer_patterns=(r"FINAL: (\S+)", *FilterPolicy().cot_answer_patterns))
        ans = extract_cot_answer("The answer is 7. FINAL: 9", AnswerKind.NUMERIC, policy)
        assert ans == Answer.numeric(9)


class TestFilterPaths:
    def test_accepting_simple_cot(self):
        p = _problem()
        accepted, report = filter_paths([(p, Mode.COT, "The answer is 12")], limits=FAST)
        assert len(accepted) == 1
        assert report.accepted == 1

    def test_timeout_pot_rejected(self):
        p = _problem()
        limits = ExecLimits(wall_timeout_ms=600)
        accepted, report = filter_paths([(p, Mode.POT, "while True: pass")], limits=limits)
        assert accepted == []
        assert report.rejections[RejectReason.TIMEOUT] == 1

    def test_twelve_generation_fixture(self):
        accepted, report = filter_paths(twelve_generation_fixture(), limits=FAST)
        assert len(accepted) == 4
        assert report.total == 12
        assert report.rejections == {
            RejectReason.NO_ANSWER: 3,
            RejectReason.EXEC_ERROR: 3,
            RejectReason.TIMEOUT: 0,
            RejectReason.GOLD_MISMATCH: 2,
        }

    def test_accepted_paths_match_gold(self):
        accepted, _ = filter_paths(twelve_generation_fixture(), limits=FAST)
        gold = _problem().gold
        assert all(answers_equivalent(path.answer, gold) for path in accepted)

    def test_gold_match_optional(self):
        policy = FilterPolicy(require_gold_match=False)
        accepted, report = filter_paths(twelve_generation_fixture(), policy, limits=FAST)
        assert len(accepted) == 6  # the two mismatches come back in
        assert report.rejections[RejectReason.GOLD_MISMATCH] == 0

    def test_order_independent_membership(self):
        generations = twelve_generation_fixture()
        shuffled = list(generations)
        random.Random(3).shuffle(shuffled)
        first, _ = filter_paths(generations, limits=FAST)
        second, _ = filter_paths(shuffled, limits=FAST)
        assert {p.text for p in first} == {p.text for p in second}

    def test_acceptance_rate_by_mode(self):
        _, report = filter_paths(twelve_generation_fixture(), limits=FAST)
        # CoT: 2 accepted of 5; PoT: 2 accepted of 7.
        assert report.acceptance_rate_by_mode["cot"] == pytest.approx(2 / 5)
        assert report.acceptance_rate_by_mode["pot"] == pytest.approx(2 / 7)

    def test_ok_pot_paths_carry_wall_ms(self):
        p = _problem()
        classified = classify_generations([(p, Mode.POT, "answer = 5 + 7")], limits=FAST)
        assert classified[0].path.status is PathStatus.OK
        assert classified[0].path.exec_wall_ms is not None

    def test_report_consistency_enforced(self):
        with pytest.raises(ValueError):
            FilterReport(total=3, accepted=1, rejections={RejectReason.NO_ANSWER: 1}, acceptance_rate_by_mode={})

    def test_classified_rows_serialize(self):
        classified = classify_generations(twelve_generation_fixture(), limits=FAST)
        rows = [c.to_row() for c in classified]
        assert sum(r["accepted"] for r in rows) == 4
        assert all(r["reject_reason"] is None for r in rows if r["accepted"])
