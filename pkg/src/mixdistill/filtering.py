"""Validation of teacher generations into accepted reasoning paths.

PoT texts must execute (via the sandbox); CoT texts must yield an
extractable answer; by default the answer must also agree with the gold
label, since benchmark training sets carry one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

from .core import (
    Answer,
    AnswerKind,
    Mode,
    PathStatus,
    Problem,
    ReasoningPath,
    answers_equivalent,
    normalize_answer,
)
from .sandbox import ExecLimits, ExecStatus, execute_many

# "The answer is X" family first; fallbacks engage only when no pattern hits.
DEFAULT_COT_PATTERNS = (
    r"[Tt]he answer is[:\s]*([^\n]+)",
    r"[Aa]nswer[:=]\s*([^\n]+)",
)

_NUMBER_TOKEN_RE = re.compile(r"-?\d[\d,]*(?:\.\d+)?")
_YESNO_TOKEN_RE = re.compile(r"\b(yes|no|true|false)\b", re.IGNORECASE)


class RejectReason(str, Enum):
    NO_ANSWER = "NoAnswer"
    EXEC_ERROR = "ExecError"
    TIMEOUT = "Timeout"
    GOLD_MISMATCH = "GoldMismatch"


@dataclass(frozen=True)
class FilterPolicy:
    require_gold_match: bool = True
    cot_answer_patterns: Tuple[str, ...] = DEFAULT_COT_PATTERNS
    keep_rejects: bool = False

    def __post_init__(self):
        if not self.cot_answer_patterns:
            raise ValueError("cot_answer_patterns must be non-empty")


@dataclass(frozen=True)
class FilterReport:
    total: int
    accepted: int
    rejections: dict
    acceptance_rate_by_mode: dict

    def __post_init__(self):
        if self.accepted + sum(self.rejections.values()) != self.total:
            raise ValueError("accepted plus rejected must equal total inputs")


@dataclass(frozen=True)
class ClassifiedPath:
    problem: Problem
    path: ReasoningPath
    accepted: bool
    reject_reason: Optional[RejectReason]

    def to_row(self) -> dict:
        return {
            "problem_id": self.problem.id,
            "dataset": self.problem.dataset.value,
            "mode": self.path.mode.value,
            "text": self.path.text,
            "answer": self.path.answer.to_canonical(),
            "status": self.path.status.value,
            "accepted": self.accepted,
            "reject_reason": self.reject_reason.value if self.reject_reason else None,
            "exec_wall_ms": self.path.exec_wall_ms,
        }


def extract_cot_answer(
    text: str, dataset_kind: AnswerKind, policy: FilterPolicy = FilterPolicy()
) -> Answer:
    """Pull the final answer out of a natural-language reasoning path.

    The first pattern with a parseable hit wins (last occurrence in the
    text, since that is the concluding statement); otherwise the fallback
    is the last number (math) or last yes/no token (boolean).
    """
    for pattern in policy.cot_answer_patterns:
        matches = list(re.finditer(pattern, text))
        for match in reversed(matches):
            answer = normalize_answer(match.group(1).strip(), dataset_kind)
            if answer.kind is not AnswerKind.NONE:
                return answer
    if dataset_kind is AnswerKind.NUMERIC:
        tokens = _NUMBER_TOKEN_RE.findall(text)
        if tokens:
            return normalize_answer(tokens[-1], dataset_kind)
    else:
        tokens = _YESNO_TOKEN_RE.findall(text)
        if tokens:
            return normalize_answer(tokens[-1], dataset_kind)
    return Answer.none()


_EXEC_TO_PATH_STATUS = {
    ExecStatus.TIMEOUT: PathStatus.TIMEOUT,
    ExecStatus.EXEC_ERROR: PathStatus.EXEC_ERROR,
    ExecStatus.OUTPUT_OVERFLOW: PathStatus.EXEC_ERROR,
}

_STATUS_TO_REASON = {
    PathStatus.NO_ANSWER: RejectReason.NO_ANSWER,
    PathStatus.EXEC_ERROR: RejectReason.EXEC_ERROR,
    PathStatus.TIMEOUT: RejectReason.TIMEOUT,
}


def build_path(
    problem: Problem,
    mode: Mode,
    text: str,
    exec_result=None,
    policy: FilterPolicy = FilterPolicy(),
) -> ReasoningPath:
    """Turn one raw generation (plus its execution result, for PoT) into a path."""
    kind = problem.dataset.answer_kind
    if mode is Mode.COT:
        answer = extract_cot_answer(text, kind, policy)
        status = PathStatus.OK if answer.kind is not AnswerKind.NONE else PathStatus.NO_ANSWER
        return ReasoningPath(problem.id, mode, text, answer, status)
    if exec_result.status is ExecStatus.OK:
        answer = normalize_answer(exec_result.answer_raw, kind)
        if answer.kind is AnswerKind.NONE:
            return ReasoningPath(
                problem.id, mode, text, answer, PathStatus.NO_ANSWER, exec_result.wall_ms
            )
        return ReasoningPath(problem.id, mode, text, answer, PathStatus.OK, exec_result.wall_ms)
    status = _EXEC_TO_PATH_STATUS[exec_result.status]
    return ReasoningPath(problem.id, mode, text, Answer.none(), status, exec_result.wall_ms)


def classify_generations(
    generations: Sequence[tuple],
    policy: FilterPolicy = FilterPolicy(),
    limits: ExecLimits = ExecLimits(),
    parallelism: int = 4,
) -> list:
    """Classify (problem, mode, text) triples; PoT texts run in the sandbox."""
    pot_indices = [i for i, (_, mode, _) in enumerate(generations) if mode is Mode.POT]
    exec_results = execute_many(
        [generations[i][2] for i in pot_indices], limits, parallelism=parallelism
    )
    by_index = dict(zip(pot_indices, exec_results))

    classified = []
    for i, (problem, mode, text) in enumerate(generations):
        path = build_path(problem, mode, text, by_index.get(i), policy)
        if path.status is not PathStatus.OK:
            classified.append(ClassifiedPath(problem, path, False, _STATUS_TO_REASON[path.status]))
        elif policy.require_gold_match and not answers_equivalent(path.answer, problem.gold):
            classified.append(ClassifiedPath(problem, path, False, RejectReason.GOLD_MISMATCH))
        else:
            classified.append(ClassifiedPath(problem, path, True, None))
    return classified


def filter_paths(
    generations: Sequence[tuple],
    policy: FilterPolicy = FilterPolicy(),
    limits: ExecLimits = ExecLimits(),
    parallelism: int = 4,
) -> tuple:
    """Returns (accepted paths, report) for a batch of raw generations."""
    classified = classify_generations(generations, policy, limits, parallelism)
    accepted = [c.path for c in classified if c.accepted]
    rejections = {reason: 0 for reason in RejectReason}
    for c in classified:
        if not c.accepted:
            rejections[c.reject_reason] += 1
    rates = {}
    for mode in Mode:
        of_mode = [c for c in classified if c.path.mode is mode]
        if of_mode:
            rates[mode.value] = sum(c.accepted for c in of_mode) / len(of_mode)
    report = FilterReport(
        total=len(classified),
        accepted=len(accepted),
        rejections=rejections,
        acceptance_rate_by_mode=rates,
    )
    return accepted, report
