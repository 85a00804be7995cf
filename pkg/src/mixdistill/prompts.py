"""Few-shot extraction prompts and student task prompts.

Template packs live in ``packs/<family>_<mode>/``: one manifest plus one
plain-text file per exemplar. Packs are reconstructions in the published
style (the manifest says so); the cue phrases are fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

from .core import Answer, Exemplar, Mode, Problem
from .errors import ModeMismatch, SchemaError

COT_CUE = "Let's think step by step"
POT_CUE = "Let's break down the code step by step"
CUES = {Mode.COT: COT_CUE, Mode.POT: POT_CUE}

PACKS_DIR = Path(__file__).parent / "packs"

_SECTION_MARKERS = ("### question", "### path", "### answer")


@dataclass(frozen=True)
class PromptTemplate:
    """Few-shot template for one dataset family and reasoning mode."""

    family: str
    mode: Mode
    exemplars: Tuple[Exemplar, ...]
    instruction_header: str
    task_tag: str

    def __post_init__(self):
        if self.task_tag != CUES[self.mode]:
            raise ValueError(f"task_tag must be the {self.mode.value} cue phrase")
        for ex in self.exemplars:
            if ex.mode is not self.mode:
                raise ValueError("exemplar mode differs from template mode")
            if self.family == "strategyqa" and self.mode is Mode.POT and "#" not in ex.path:
                raise ValueError("strategyqa PoT exemplars must carry rationale comments")


def _parse_exemplar_file(path: Path, mode: Mode, answer_kind) -> Exemplar:
    sections = {}
    current = None
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip() in _SECTION_MARKERS:
            current = line.strip().removeprefix("### ")
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    missing = [m.removeprefix("### ") for m in _SECTION_MARKERS if m.removeprefix("### ") not in sections]
    if missing:
        raise SchemaError(f"exemplar {path} missing sections: {missing}")
    question = "\n".join(sections["question"]).strip()
    reasoning = "\n".join(sections["path"]).strip()
    label_text = "\n".join(sections["answer"]).strip()
    from .core import normalize_answer

    label = normalize_answer(label_text, answer_kind)
    if label.kind.value == "none":
        raise SchemaError(f"exemplar {path} label {label_text!r} does not parse")
    return Exemplar(input=question, path=reasoning, label=label, mode=mode)


def load_pack(pack_dir) -> PromptTemplate:
    pack_dir = Path(pack_dir)
    manifest_path = pack_dir / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read pack manifest {manifest_path}: {exc}") from exc
    mode = Mode(manifest["mode"])
    family = manifest["family"]
    from .core import AnswerKind

    answer_kind = AnswerKind.BOOLEAN if family == "strategyqa" else AnswerKind.NUMERIC
    exemplars = tuple(
        _parse_exemplar_file(pack_dir / name, mode, answer_kind)
        for name in manifest["exemplars"]
    )
    return PromptTemplate(
        family=family,
        mode=mode,
        exemplars=exemplars,
        instruction_header=manifest["instruction_header"],
        task_tag=manifest["cue"],
    )


def default_template(family: str, mode: Mode) -> PromptTemplate:
    """The bundled 4-shot pack for a dataset family and mode."""
    return load_pack(PACKS_DIR / f"{family}_{mode.value}")


def render_extraction_prompt(template: PromptTemplate, problem: Problem) -> str:
    """Few-shot prompt: header, exemplar triplets in order, target question, cue."""
    if problem.dataset.family != template.family:
        raise ModeMismatch(
            f"template family {template.family!r} does not cover dataset "
            f"{problem.dataset.value!r}"
        )
    blocks = [template.instruction_header]
    for ex in template.exemplars:
        blocks.append(f"Question: {ex.input}\n{template.task_tag}\n{ex.path}")
    blocks.append(f"Question: {problem.question}\n{template.task_tag}")
    return "\n\n".join(blocks)


def render_student_prompt(question: str, mode: Mode) -> str:
    """Question plus the mode's task tag; the student is fine-tuned, not few-shot."""
    return f"{question}\n{CUES[mode]}"
