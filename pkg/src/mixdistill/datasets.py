"""Benchmark loading: published file formats in, canonical ProblemSets out.

Supported sources are the datasets' published schemas: SVAMP (JSON array),
GSM8K (JSONL with a final-line "#### <answer>" marker), ASDIV (single XML
corpus, split derived by grade-stratified selection), StrategyQA (JSON array
with boolean answers; the published dev file serves as the test split).
"""

from __future__ import annotations

import hashlib
import json
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .core import Answer, AnswerKind, Dataset, Problem, normalize_answer
from .errors import MissingKey, SchemaError, UnknownSplit

# Published ASDIV test-set size; the selection is grade-stratified over the
# full corpus and seeded for reproducibility (the original item list is
# unpublished, so seed 0 is fixed as the canonical split).
ASDIV_TEST_SIZE = 695
ASDIV_SPLIT_SEED = 0


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class Provenance:
    source: str
    sha256: str
    note: str = ""


@dataclass(frozen=True)
class ProblemSet:
    dataset: Dataset
    split: Split
    problems: tuple
    provenance: Provenance

    def __post_init__(self):
        ids = [p.id for p in self.problems]
        if len(ids) != len(set(ids)):
            raise SchemaError(f"duplicate problem ids in {self.dataset.value}/{self.split.value}")

    def __len__(self):
        return len(self.problems)

    def ids(self) -> list:
        return [p.id for p in self.problems]


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc


def _provenance(path: Path, note: str = "") -> Provenance:
    digest = hashlib.sha256(_read_bytes(path)).hexdigest()
    return Provenance(source=str(path), sha256=digest, note=note)


def _gold_numeric(raw: str, context: str) -> Answer:
    ans = normalize_answer(str(raw), AnswerKind.NUMERIC)
    if ans.kind is AnswerKind.NONE:
        raise SchemaError(f"{context}: gold answer {raw!r} is not numeric")
    return ans


def load_dataset(dataset: Dataset, split: Split, source_path) -> ProblemSet:
    """Load one split of a benchmark from its published file format."""
    if not isinstance(split, Split):
        try:
            split = Split(split)
        except ValueError as exc:
            raise UnknownSplit(f"unknown split {split!r}") from exc
    path = Path(source_path)
    if dataset is Dataset.SVAMP:
        problems = _load_svamp(path)
    elif dataset is Dataset.GSM8K:
        problems = _load_gsm8k(path, split)
    elif dataset is Dataset.ASDIV:
        return _load_asdiv(path, split)
    elif dataset is Dataset.STRATEGYQA:
        problems = _load_strategyqa(path)
    else:  # pragma: no cover - exhaustive over the enum
        raise SchemaError(f"unsupported dataset {dataset}")
    return ProblemSet(dataset, split, tuple(problems), _provenance(path))


def _load_json_array(path: Path, dataset: str) -> list:
    text = _read_bytes(path).decode("utf-8")
    stripped = text.lstrip()
    try:
        if stripped.startswith("["):
            items = json.loads(text)
        else:
            items = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{dataset} file {path} is not valid JSON: {exc}") from exc
    if not isinstance(items, list):
        raise SchemaError(f"{dataset} file {path} does not hold a list of items")
    return items


def _load_svamp(path: Path) -> list:
    problems = []
    for i, item in enumerate(_load_json_array(path, "SVAMP")):
        try:
            body = str(item["Body"]).strip()
            question = str(item["Question"]).strip()
            problems.append(
                Problem(
                    id=str(item["ID"]),
                    dataset=Dataset.SVAMP,
                    question=f"{body} {question}".strip(),
                    gold=_gold_numeric(item["Answer"], f"SVAMP item {i}"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"SVAMP item {i} missing field {exc}") from exc
    return problems


def _load_gsm8k(path: Path, split: Split) -> list:
    problems = []
    for i, item in enumerate(_load_json_array(path, "GSM8K")):
        try:
            question = str(item["question"]).strip()
            solution = str(item["answer"])
        except KeyError as exc:
            raise SchemaError(f"GSM8K item {i} missing field {exc}") from exc
        # Gold lives after the dataset's own final-answer delimiter.
        marker = solution.rsplit("####", 1)
        if len(marker) != 2:
            raise SchemaError(f"GSM8K item {i} has no '####' answer marker")
        problems.append(
            Problem(
                id=f"gsm8k-{split.value}-{i:05d}",
                dataset=Dataset.GSM8K,
                question=question,
                gold=_gold_numeric(marker[1].strip(), f"GSM8K item {i}"),
            )
        )
    return problems


def _load_asdiv_corpus(path: Path) -> list:
    try:
        root = ET.fromstring(_read_bytes(path).decode("utf-8"))
    except ET.ParseError as exc:
        raise SchemaError(f"ASDIV file {path} is not valid XML: {exc}") from exc
    problems = []
    for node in root.iter("Problem"):
        pid = node.get("ID")
        grade = node.get("Grade")
        body = node.findtext("Body", "").strip()
        question = node.findtext("Question", "").strip()
        answer = node.findtext("Answer", "").strip()
        if pid is None or grade is None:
            raise SchemaError(f"ASDIV problem missing ID or Grade attribute ({pid})")
        problems.append(
            Problem(
                id=pid,
                dataset=Dataset.ASDIV,
                question=f"{body} {question}".strip(),
                gold=_gold_numeric(answer, f"ASDIV item {pid}"),
                grade=int(grade),
            )
        )
    if not problems:
        raise SchemaError(f"ASDIV file {path} holds no Problem elements")
    return problems


def _load_asdiv(path: Path, split: Split, test_size: int = ASDIV_TEST_SIZE) -> ProblemSet:
    corpus = _load_asdiv_corpus(path)
    note = f"canonical grade-stratified split, test_size={test_size}, seed={ASDIV_SPLIT_SEED}"
    pool = ProblemSet(Dataset.ASDIV, Split.TEST, tuple(corpus), _provenance(path, note))
    test_set = stratified_test_select(pool, test_size, seed=ASDIV_SPLIT_SEED)
    if split is Split.TEST:
        return test_set
    selected = set(test_set.ids())
    train = tuple(p for p in corpus if p.id not in selected)
    return ProblemSet(Dataset.ASDIV, Split.TRAIN, train, _provenance(path, note))


def load_asdiv_with_test_size(path, split: Split, test_size: int) -> ProblemSet:
    """ASDIV loader with an explicit test-set size (scaled fixtures)."""
    return _load_asdiv(Path(path), split, test_size=test_size)


def _load_strategyqa(path: Path) -> list:
    problems = []
    for i, item in enumerate(_load_json_array(path, "StrategyQA")):
        try:
            pid = str(item["qid"])
            question = str(item["question"]).strip()
            answer = item["answer"]
        except KeyError as exc:
            raise SchemaError(f"StrategyQA item {i} missing field {exc}") from exc
        if not isinstance(answer, bool):
            raise SchemaError(f"StrategyQA item {pid} answer is not boolean")
        problems.append(
            Problem(
                id=pid,
                dataset=Dataset.STRATEGYQA,
                question=question,
                gold=Answer.boolean(answer),
            )
        )
    return problems


def stratified_test_select(pool: ProblemSet, n: int, seed: int, key: str = "grade") -> ProblemSet:
    """Select n items whose per-stratum counts mirror the pool distribution.

    Quotas use largest-remainder rounding; sampling within a stratum is
    uniform and deterministic for a given seed.
    """
    if n > len(pool):
        raise ValueError(f"cannot select {n} items from a pool of {len(pool)}")
    strata: dict = {}
    for idx, problem in enumerate(pool.problems):
        value = getattr(problem, key, None)
        if value is None:
            raise MissingKey(f"problem {problem.id} lacks stratification key {key!r}")
        strata.setdefault(value, []).append(idx)

    total = len(pool)
    quotas = {}
    remainders = []
    assigned = 0
    for value in sorted(strata):
        exact = n * len(strata[value]) / total
        base = int(exact)
        quotas[value] = base
        assigned += base
        remainders.append((exact - base, value))
    remainders.sort(key=lambda item: (-item[0], item[1]))
    for _, value in remainders[: n - assigned]:
        quotas[value] += 1

    rng = random.Random(seed)
    chosen: list = []
    for value in sorted(strata):
        take = min(quotas[value], len(strata[value]))
        chosen.extend(rng.sample(strata[value], take))
    chosen.sort()
    selected = tuple(pool.problems[i] for i in chosen)
    return ProblemSet(pool.dataset, Split.TEST, selected, pool.provenance)


def subsample(problem_set: ProblemSet, fraction: float, seed: int) -> ProblemSet:
    """Uniform without-replacement subsample of round(fraction * N) items."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return problem_set
    n = int(fraction * len(problem_set) + 0.5)
    rng = random.Random(seed)
    keep = sorted(rng.sample(range(len(problem_set)), n))
    note = f"subsample fraction={fraction} seed={seed}"
    prov = Provenance(problem_set.provenance.source, problem_set.provenance.sha256, note)
    return ProblemSet(problem_set.dataset, problem_set.split, tuple(problem_set.problems[i] for i in keep), prov)


def problem_to_row(problem: Problem, split: Split) -> dict:
    row = {
        "id": problem.id,
        "dataset": problem.dataset.value,
        "split": split.value,
        "question": problem.question,
        "gold": problem.gold.to_canonical(),
    }
    if problem.grade is not None:
        row["grade"] = problem.grade
    return row


def problem_from_row(row: dict) -> Problem:
    return Problem(
        id=row["id"],
        dataset=Dataset(row["dataset"]),
        question=row["question"],
        gold=Answer.from_canonical(row["gold"]),
        grade=row.get("grade"),
    )


def write_problems_jsonl(problem_set: ProblemSet, path) -> None:
    lines = [
        json.dumps(problem_to_row(p, problem_set.split), ensure_ascii=False)
        for p in problem_set.problems
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_problems_jsonl(path) -> list:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(problem_from_row(json.loads(line)))
    return rows
