"""Training-record JSONL intake.

The file schema is the builder's interchange format: one object per line
with id, input, target, task (cot|pot|label), and a numeric weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

TASKS = ("cot", "pot", "label")


class RecordSchemaError(Exception):
    """A record line is malformed; the message names the line."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


@dataclass(frozen=True)
class TrainRecord:
    problem_id: str
    input: str
    target: str
    task: str
    weight: float


def load_records(path) -> list:
    records = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordSchemaError(line_no, f"not valid JSON ({exc.msg})") from exc
        for key in ("id", "input", "target", "task", "weight"):
            if key not in row:
                raise RecordSchemaError(line_no, f"missing field {key!r}")
        if row["task"] not in TASKS:
            raise RecordSchemaError(line_no, f"unknown task {row['task']!r}")
        if not isinstance(row["weight"], (int, float)) or isinstance(row["weight"], bool):
            raise RecordSchemaError(line_no, "weight must be a number")
        if not isinstance(row["input"], str) or not isinstance(row["target"], str):
            raise RecordSchemaError(line_no, "input and target must be strings")
        records.append(
            TrainRecord(
                problem_id=str(row["id"]),
                input=row["input"],
                target=row["target"],
                task=row["task"],
                weight=float(row["weight"]),
            )
        )
    if not records:
        raise RecordSchemaError(0, "no records in file")
    return records


def task_weights(records) -> dict:
    """The per-task weight; rejects files where a task's weight is not uniform."""
    weights: dict = {}
    for record in records:
        if record.task in weights and weights[record.task] != record.weight:
            raise ValueError(
                f"task {record.task!r} carries mixed weights "
                f"({weights[record.task]} and {record.weight})"
            )
        weights.setdefault(record.task, record.weight)
    return weights
