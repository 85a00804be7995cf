"""Multi-path student inference: sample n paths per mode, execute PoT, vote.

The vote groups answers by equivalence (first-seen representative), takes
the largest group, and breaks ties by earliest first occurrence in the
concatenated CoT-then-PoT list. Failed paths never enter the vote; a
problem with no surviving answers abstains (NONE final, scored incorrect).
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .client import ChatClient, SamplingParams
from .core import Answer, AnswerKind, Mode, PathStatus, Problem, ReasoningPath, answers_equivalent
from .errors import InsufficientPaths
from .filtering import FilterPolicy, build_path
from .sandbox import ExecLimits, execute_many

DEFAULT_PATHS_PER_MODE = 10  # 20 total sampling paths by default


def vote(a_cot: Sequence[Answer], a_pot: Sequence[Answer]) -> Answer:
    """Most frequent answer over concat(A_cot, A_pot); NONE when both empty."""
    answers = [a for a in list(a_cot) + list(a_pot) if a.kind is not AnswerKind.NONE]
    groups = []  # [representative, count, first_index]
    for index, answer in enumerate(answers):
        for group in groups:
            if answers_equivalent(group[0], answer):
                group[1] += 1
                break
        else:
            groups.append([answer, 1, index])
    if not groups:
        return Answer.none()
    best = max(groups, key=lambda g: (g[1], -g[2]))
    return best[0]


def vote_counts(a_cot: Sequence[Answer], a_pot: Sequence[Answer]) -> dict:
    """Equivalence-grouped counts keyed by the representative's canonical text."""
    answers = [a for a in list(a_cot) + list(a_pot) if a.kind is not AnswerKind.NONE]
    groups: list = []
    for answer in answers:
        for group in groups:
            if answers_equivalent(group[0], answer):
                group[1] += 1
                break
        else:
            groups.append([answer, 1])
    return {group[0].to_canonical(): group[1] for group in groups}


@dataclass(frozen=True)
class PathBundle:
    """Per-problem inference result, pre- and post-vote."""

    problem_id: str
    cot_paths: Tuple[ReasoningPath, ...]
    pot_paths: Tuple[ReasoningPath, ...]
    final: Answer
    counts: dict

    @property
    def a_cot(self) -> list:
        return [p.answer for p in self.cot_paths if p.status is PathStatus.OK]

    @property
    def a_pot(self) -> list:
        return [p.answer for p in self.pot_paths if p.status is PathStatus.OK]

    @staticmethod
    def from_paths(problem_id: str, cot_paths, pot_paths) -> "PathBundle":
        a_cot = [p.answer for p in cot_paths if p.status is PathStatus.OK]
        a_pot = [p.answer for p in pot_paths if p.status is PathStatus.OK]
        return PathBundle(
            problem_id=problem_id,
            cot_paths=tuple(cot_paths),
            pot_paths=tuple(pot_paths),
            final=vote(a_cot, a_pot),
            counts=vote_counts(a_cot, a_pot),
        )


def sample_paths(
    problem: Problem,
    client: ChatClient,
    n_cot: int = DEFAULT_PATHS_PER_MODE,
    n_pot: int = DEFAULT_PATHS_PER_MODE,
    params: SamplingParams = SamplingParams(),
    limits: ExecLimits = ExecLimits(),
    policy: FilterPolicy = FilterPolicy(),
    exec_parallelism: int = 4,
) -> PathBundle:
    """Sample n_cot CoT and n_pot PoT paths for one problem and vote."""
    if n_cot + n_pot < 1:
        raise ValueError("need at least one path across the two modes")
    from .prompts import render_student_prompt

    cot_texts: Sequence[str] = []
    pot_texts: Sequence[str] = []
    if n_cot:
        batch = client.sample(
            render_student_prompt(problem.question, Mode.COT),
            dataclasses.replace(params, n_samples=n_cot),
        )
        cot_texts = batch.texts
    if n_pot:
        batch = client.sample(
            render_student_prompt(problem.question, Mode.POT),
            dataclasses.replace(params, n_samples=n_pot),
        )
        pot_texts = batch.texts

    cot_paths = [build_path(problem, Mode.COT, text, policy=policy) for text in cot_texts]
    exec_results = execute_many(list(pot_texts), limits, parallelism=exec_parallelism)
    pot_paths = [
        build_path(problem, Mode.POT, text, result, policy)
        for text, result in zip(pot_texts, exec_results)
    ]
    return PathBundle.from_paths(problem.id, cot_paths, pot_paths)


# -- stored predictions --------------------------------------------------------


@dataclass(frozen=True)
class PerPath:
    mode: Mode
    text_hash: str
    status: PathStatus
    answer: Answer


@dataclass(frozen=True)
class PredictionRecord:
    problem_id: str
    mode_config: dict
    a_cot: Tuple[Answer, ...]
    a_pot: Tuple[Answer, ...]
    final: Answer
    gold: Answer
    correct: bool
    per_path: Tuple[PerPath, ...]

    def paths(self, mode: Mode) -> list:
        return [p for p in self.per_path if p.mode is mode]

    def answers(self, mode: Mode, k: Optional[int] = None) -> list:
        """Answers of the first k paths of a mode, failures excluded."""
        selected = self.paths(mode)
        if k is not None:
            selected = selected[:k]
        return [p.answer for p in selected if p.answer.kind is not AnswerKind.NONE]

    def revote(self, mode: str, k: Optional[int] = None) -> Answer:
        if mode == "cot":
            return vote(self.answers(Mode.COT, k), [])
        if mode == "pot":
            return vote([], self.answers(Mode.POT, k))
        return vote(self.answers(Mode.COT, k), self.answers(Mode.POT, k))

    def solved(self, mode: str, rule) -> bool:
        from .evaluation import SolvabilityRule

        if rule is SolvabilityRule.ANY_PATH:
            pool = self.answers(Mode(mode))
            return any(answers_equivalent(a, self.gold) for a in pool)
        return answers_equivalent(self.revote(mode), self.gold)

    def to_row(self) -> dict:
        return {
            "id": self.problem_id,
            "mode_config": self.mode_config,
            "A_cot": [a.to_canonical() for a in self.a_cot],
            "A_pot": [a.to_canonical() for a in self.a_pot],
            "final": self.final.to_canonical(),
            "gold": self.gold.to_canonical(),
            "correct": self.correct,
            "per_path": [
                {
                    "mode": p.mode.value,
                    "text_hash": p.text_hash,
                    "status": p.status.value,
                    "answer": p.answer.to_canonical(),
                }
                for p in self.per_path
            ],
        }

    @staticmethod
    def from_row(row: dict) -> "PredictionRecord":
        return PredictionRecord(
            problem_id=row["id"],
            mode_config=row["mode_config"],
            a_cot=tuple(Answer.from_canonical(a) for a in row["A_cot"]),
            a_pot=tuple(Answer.from_canonical(a) for a in row["A_pot"]),
            final=Answer.from_canonical(row["final"]),
            gold=Answer.from_canonical(row["gold"]),
            correct=row["correct"],
            per_path=tuple(
                PerPath(
                    mode=Mode(p["mode"]),
                    text_hash=p["text_hash"],
                    status=PathStatus(p["status"]),
                    answer=Answer.from_canonical(p["answer"]),
                )
                for p in row["per_path"]
            ),
        )


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def bundle_to_record(bundle: PathBundle, problem: Problem, mode_config: dict) -> PredictionRecord:
    per_path = tuple(
        PerPath(path.mode, text_hash(path.text), path.status, path.answer)
        for path in list(bundle.cot_paths) + list(bundle.pot_paths)
    )
    return PredictionRecord(
        problem_id=bundle.problem_id,
        mode_config=mode_config,
        a_cot=tuple(bundle.a_cot),
        a_pot=tuple(bundle.a_pot),
        final=bundle.final,
        gold=problem.gold,
        correct=answers_equivalent(bundle.final, problem.gold),
        per_path=per_path,
    )


def path_sweep(
    records: Sequence[PredictionRecord],
    max_n: int,
    modes: Tuple[str, ...] = ("cot", "pot", "combined"),
) -> list:
    """Accuracy-vs-k rows: re-vote on the first k paths for k = 1..max_n."""
    from .evaluation import score

    if max_n < 1:
        raise InsufficientPaths("max_n must be at least 1")
    need = [m for m in ("cot", "pot") if m in modes or "combined" in modes]
    for record in records:
        for mode in need:
            if len(record.paths(Mode(mode))) < max_n:
                raise InsufficientPaths(
                    f"problem {record.problem_id} has fewer than {max_n} {mode} paths"
                )
    gold = {r.problem_id: r.gold for r in records}
    rows = []
    for mode in modes:
        for k in range(1, max_n + 1):
            predictions = [(r.problem_id, r.revote(mode, k)) for r in records]
            rows.append((mode, k, score(predictions, gold)))
    return rows
