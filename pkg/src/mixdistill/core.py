"""Domain types plus answer normalization and equivalence.

Answers are stored exactly (`fractions.Fraction` for numerics) so that
canonical rendering round-trips and comparisons never inherit float noise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

# Default numeric comparison tolerance, mixed absolute/relative.
NUMERIC_ABS_TOL = Fraction(1, 10**6)
NUMERIC_REL_TOL = Fraction(1, 10**6)


class Dataset(str, Enum):
    SVAMP = "svamp"
    GSM8K = "gsm8k"
    ASDIV = "asdiv"
    STRATEGYQA = "strategyqa"

    @property
    def answer_kind(self) -> "AnswerKind":
        if self is Dataset.STRATEGYQA:
            return AnswerKind.BOOLEAN
        return AnswerKind.NUMERIC

    @property
    def family(self) -> str:
        """Prompt-template family: math templates interchange across the three math sets."""
        return "strategyqa" if self is Dataset.STRATEGYQA else "math"


class Mode(str, Enum):
    COT = "cot"
    POT = "pot"


class AnswerKind(str, Enum):
    NUMERIC = "numeric"
    BOOLEAN = "boolean"
    NONE = "none"


class PathStatus(str, Enum):
    OK = "Ok"
    NO_ANSWER = "NoAnswer"
    EXEC_ERROR = "ExecError"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class Answer:
    """A numeric, boolean, or absent answer value.

    Exactly one payload shape per kind: Fraction for NUMERIC, bool for
    BOOLEAN, None for NONE.
    """

    kind: AnswerKind
    value: Union[Fraction, bool, None] = None

    def __post_init__(self):
        if self.kind is AnswerKind.NUMERIC and not isinstance(self.value, Fraction):
            raise ValueError("numeric answers carry a Fraction payload")
        if self.kind is AnswerKind.BOOLEAN and not isinstance(self.value, bool):
            raise ValueError("boolean answers carry a bool payload")
        if self.kind is AnswerKind.NONE and self.value is not None:
            raise ValueError("none answers carry no payload")

    @staticmethod
    def numeric(value) -> "Answer":
        try:
            frac = Fraction(value)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise ValueError(f"not a finite numeric value: {value!r}") from exc
        return Answer(AnswerKind.NUMERIC, frac)

    @staticmethod
    def boolean(value: bool) -> "Answer":
        return Answer(AnswerKind.BOOLEAN, bool(value))

    @staticmethod
    def none() -> "Answer":
        return Answer(AnswerKind.NONE)

    def to_canonical(self) -> Optional[str]:
        """Canonical textual rendering used in all JSONL files.

        Numeric: exact shortest decimal when the value terminates, "n/d"
        otherwise. Boolean: "yes"/"no". NONE: None (JSON null).
        """
        if self.kind is AnswerKind.NONE:
            return None
        if self.kind is AnswerKind.BOOLEAN:
            return "yes" if self.value else "no"
        return _fraction_to_canonical(self.value)

    @staticmethod
    def from_canonical(text: Optional[str]) -> "Answer":
        if text is None:
            return Answer.none()
        if text in ("yes", "no"):
            return Answer.boolean(text == "yes")
        return Answer.numeric(Fraction(text))


def _fraction_to_canonical(frac: Fraction) -> str:
    num, den = frac.numerator, frac.denominator
    if den == 1:
        return str(num)
    # Factor the denominator; a residue of 1 means the decimal terminates.
    twos = fives = 0
    residue = den
    while residue % 2 == 0:
        residue //= 2
        twos += 1
    while residue % 5 == 0:
        residue //= 5
        fives += 1
    if residue != 1:
        return f"{num}/{den}"
    scale = max(twos, fives)
    digits = abs(num) * (10**scale // den)
    text = str(digits).rjust(scale + 1, "0")
    whole, frac_part = text[:-scale], text[-scale:].rstrip("0")
    sign = "-" if num < 0 else ""
    return f"{sign}{whole}.{frac_part}" if frac_part else f"{sign}{whole}"


# Numeric answer grammar: optional currency, signed number with optional
# thousands separators / decimal / exponent / rational, then trailing units.
_CURRENCY = r"[$€£]?\s*"
_NUMBER = (
    r"(?P<num>[+-]?(?:"
    r"\d{1,3}(?:,\d{3})+(?:\.\d+)?"  # comma-grouped
    r"|\d+\.\d+(?:[eE][+-]?\d+)?"
    r"|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?(?:\s*/\s*\d+)?"
    r"))"
)
_NUMERIC_ANSWER_RE = re.compile(
    rf"^\s*{_CURRENCY}{_NUMBER}(?P<rest>.*)$", re.DOTALL
)
_BOOLEAN_TRUE = {"yes", "true"}
_BOOLEAN_FALSE = {"no", "false"}


def normalize_answer(raw: str, dataset_kind: AnswerKind) -> Answer:
    """Parse a candidate answer string into an Answer.

    Numeric strings lose thousands separators and trailing units;
    booleans map from {yes,true}/{no,false} case-insensitively.
    Anything unparseable yields the NONE kind.
    """
    if raw is None:
        return Answer.none()
    text = raw.strip()
    if not text:
        return Answer.none()
    if dataset_kind is AnswerKind.BOOLEAN:
        word = text.strip().strip(".,!?;:\"'()").lower()
        if word in _BOOLEAN_TRUE:
            return Answer.boolean(True)
        if word in _BOOLEAN_FALSE:
            return Answer.boolean(False)
        return Answer.none()
    match = _NUMERIC_ANSWER_RE.match(text)
    if not match:
        return Answer.none()
    rest = match.group("rest")
    if re.search(r"\d", rest):
        # A second number follows; the string is not a single answer.
        return Answer.none()
    token = match.group("num").replace(",", "").replace(" ", "")
    try:
        if "e" in token.lower() and "/" not in token:
            value = Fraction(float(token))
        else:
            value = Fraction(token)
    except (ValueError, ZeroDivisionError, OverflowError):
        return Answer.none()
    return Answer(AnswerKind.NUMERIC, value)


def answers_equivalent(
    a: Answer,
    b: Answer,
    abs_tol: Fraction = NUMERIC_ABS_TOL,
    rel_tol: Fraction = NUMERIC_REL_TOL,
) -> bool:
    """Whether two answers agree.

    Numeric answers agree within max(abs_tol, rel_tol * magnitude); the
    magnitude is the larger of the two so the relation stays symmetric.
    NONE never agrees with anything, including NONE.
    """
    if a.kind is AnswerKind.NONE or b.kind is AnswerKind.NONE:
        return False
    if a.kind is not b.kind:
        return False
    if a.kind is AnswerKind.BOOLEAN:
        return a.value is b.value or a.value == b.value
    diff = abs(a.value - b.value)
    return diff <= max(abs_tol, rel_tol * max(abs(a.value), abs(b.value)))


@dataclass(frozen=True)
class Problem:
    """One benchmark item: a question and its gold answer."""

    id: str
    dataset: Dataset
    question: str
    gold: Answer
    grade: Optional[int] = None

    def __post_init__(self):
        if not self.question:
            raise ValueError(f"problem {self.id}: empty question")
        if self.gold.kind is not self.dataset.answer_kind:
            raise ValueError(
                f"problem {self.id}: gold kind {self.gold.kind.value} does not "
                f"match dataset {self.dataset.value}"
            )


@dataclass(frozen=True)
class Exemplar:
    """One few-shot triplet: example input, reasoning path, label."""

    input: str
    path: str
    label: Answer
    mode: Mode

    def __post_init__(self):
        if not self.path:
            raise ValueError("exemplar path must be non-empty")
        if self.mode is Mode.POT:
            try:
                compile(self.path, "<exemplar>", "exec")
            except SyntaxError as exc:
                raise ValueError(f"PoT exemplar is not valid program text: {exc}") from exc


@dataclass(frozen=True)
class ReasoningPath:
    """One generated thought: raw text plus its extracted answer and status."""

    problem_id: str
    mode: Mode
    text: str
    answer: Answer
    status: PathStatus
    exec_wall_ms: Optional[int] = None

    def __post_init__(self):
        has_answer = self.answer.kind is not AnswerKind.NONE
        if (self.status is PathStatus.OK) != has_answer:
            raise ValueError(
                f"path for {self.problem_id}: status {self.status.value} "
                f"inconsistent with answer kind {self.answer.kind.value}"
            )
        if self.mode is Mode.POT and self.status is PathStatus.OK and self.exec_wall_ms is None:
            raise ValueError(f"ok PoT path for {self.problem_id} must carry exec_wall_ms")

    def to_row(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "mode": self.mode.value,
            "text": self.text,
            "answer": self.answer.to_canonical(),
            "status": self.status.value,
            "exec_wall_ms": self.exec_wall_ms,
        }

    @staticmethod
    def from_row(row: dict) -> "ReasoningPath":
        return ReasoningPath(
            problem_id=row["problem_id"],
            mode=Mode(row["mode"]),
            text=row["text"],
            answer=Answer.from_canonical(row["answer"]),
            status=PathStatus(row["status"]),
            exec_wall_ms=row.get("exec_wall_ms"),
        )
