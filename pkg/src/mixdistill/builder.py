"""Packaging of accepted paths into weighted multi-task training JSONL.

Four build modes: a label-only baseline, the two single-mode distillation
sets, and the λ-mixed multi-task set. λ is realized as a per-record weight
consumed by the trainer; the mixture stays exact instead of stochastic.
Targets are the path text plus a canonical final answer line, so answer
extraction at inference mirrors what the student saw in training.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

from .core import Answer, AnswerKind, Mode, Problem, ReasoningPath
from .errors import EmptyCorpus
from .prompts import CUES, render_student_prompt


class BuildMode(str, Enum):
    LABEL = "label"
    COT_ONLY = "cot_only"
    POT_ONLY = "pot_only"
    MIXED = "mixed"


class Selection(str, Enum):
    FIRST = "first"
    ALL = "all"
    BEST_N = "best_n"


@dataclass(frozen=True)
class DistillRecord:
    problem_id: str
    input: str
    target: str
    task: str  # cot | pot | label
    weight: float

    def __post_init__(self):
        if self.task in ("cot", "pot"):
            cue = CUES[Mode(self.task)]
            if not self.input.endswith(cue):
                raise ValueError(f"{self.task} record input must end with its cue")
            if cue in self.target:
                raise ValueError("task cue leaked into a record target")

    def to_row(self) -> dict:
        return {
            "id": self.problem_id,
            "input": self.input,
            "target": self.target,
            "task": self.task,
            "weight": self.weight,
        }

    @staticmethod
    def from_row(row: dict) -> "DistillRecord":
        return DistillRecord(
            problem_id=row["id"],
            input=row["input"],
            target=row["target"],
            task=row["task"],
            weight=row["weight"],
        )


@dataclass(frozen=True)
class BuildManifest:
    lambda_: float
    mode: str
    selection: str
    counts: dict
    source_hash: str

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "mode": self.mode,
            "selection": self.selection,
            "counts": self.counts,
            "source_hash": self.source_hash,
        }


def _answer_line(answer: Answer, mode: Mode) -> str:
    canonical = answer.to_canonical()
    if mode is Mode.COT:
        return f"The answer is {canonical}"
    if answer.kind is AnswerKind.BOOLEAN:
        return f"answer = {'True' if answer.value else 'False'}"
    return f"answer = {canonical}"


def _target_for(path: ReasoningPath) -> str:
    # Cue phrases belong in inputs only; drop any echoed cue lines.
    lines = [ln for ln in path.text.splitlines() if ln.strip() not in CUES.values()]
    body = "\n".join(lines).strip()
    target = f"{body}\n{_answer_line(path.answer, path.mode)}" if body else _answer_line(path.answer, path.mode)
    return target


def _select(paths: Sequence[ReasoningPath], selection: Selection, best_n: int) -> Sequence[ReasoningPath]:
    if selection is Selection.FIRST:
        return paths[:1]
    if selection is Selection.BEST_N:
        return paths[:best_n]
    return paths


def build(
    accepted: Sequence[ReasoningPath],
    problems: Sequence[Problem],
    mode: BuildMode = BuildMode.MIXED,
    lambda_: float = 0.5,
    selection: Selection = Selection.FIRST,
    best_n: int = 1,
) -> Tuple[list, BuildManifest]:
    """Emit deterministic training records for one build mode.

    Mixed mode weights CoT records (1 - λ) and PoT records λ; single modes
    and the label baseline use weight 1. Record order is (problem id, task).
    """
    if not 0 <= lambda_ <= 1:
        raise ValueError(f"lambda must be in [0, 1], got {lambda_}")
    by_id = {p.id: p for p in problems}

    records: list = []
    if mode is BuildMode.LABEL:
        if not problems:
            raise EmptyCorpus("label build needs problems with gold answers")
        for problem in problems:
            records.append(
                DistillRecord(
                    problem_id=problem.id,
                    input=problem.question,
                    target=problem.gold.to_canonical(),
                    task="label",
                    weight=1.0,
                )
            )
    else:
        wanted = {
            BuildMode.COT_ONLY: (Mode.COT,),
            BuildMode.POT_ONLY: (Mode.POT,),
            BuildMode.MIXED: (Mode.COT, Mode.POT),
        }[mode]
        grouped: dict = {}
        for path in accepted:
            if path.mode in wanted and path.problem_id in by_id:
                grouped.setdefault((path.problem_id, path.mode), []).append(path)
        for path_mode in wanted:
            if not any(key[1] is path_mode for key in grouped):
                raise EmptyCorpus(f"no accepted {path_mode.value} paths to build from")
        weights = {
            Mode.COT: (1 - lambda_) if mode is BuildMode.MIXED else 1.0,
            Mode.POT: lambda_ if mode is BuildMode.MIXED else 1.0,
        }
        for (problem_id, path_mode), paths in grouped.items():
            problem = by_id[problem_id]
            for path in _select(paths, selection, best_n):
                records.append(
                    DistillRecord(
                        problem_id=problem_id,
                        input=render_student_prompt(problem.question, path_mode),
                        target=_target_for(path),
                        task=path_mode.value,
                        weight=weights[path_mode],
                    )
                )

    records.sort(key=lambda r: (r.problem_id, r.task))
    counts: dict = {}
    for record in records:
        counts[record.task] = counts.get(record.task, 0) + 1
    # Measured durations are run metadata; the hash covers content only.
    content_rows = []
    for path in accepted:
        row = path.to_row()
        row.pop("exec_wall_ms", None)
        content_rows.append(row)
    source_payload = json.dumps(content_rows + [p.id for p in problems], ensure_ascii=False)
    manifest = BuildManifest(
        lambda_=lambda_,
        mode=mode.value,
        selection=selection.value,
        counts=counts,
        source_hash=hashlib.sha256(source_payload.encode("utf-8")).hexdigest(),
    )
    return records, manifest


def resample_records(records: Sequence[DistillRecord], granularity: int = 4) -> list:
    """Weight-free rendering of a weighted mix, for trainers that cannot weight.

    Each record is replicated round(weight * granularity) times at weight 1,
    so the empirical task mixture approximates the weights (exact whenever
    weight * granularity is integral). Deterministic; order preserved.
    """
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    replicated = []
    for record in records:
        copies = int(record.weight * granularity + 0.5)
        for _ in range(copies):
            replicated.append(
                DistillRecord(record.problem_id, record.input, record.target, record.task, 1.0)
            )
    if not replicated:
        raise EmptyCorpus("resampling dropped every record; raise the granularity")
    return replicated


def write_records_jsonl(records: Sequence[DistillRecord], path) -> None:
    lines = [json.dumps(r.to_row(), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_records_jsonl(path) -> list:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(DistillRecord.from_row(json.loads(line)))
    return records
