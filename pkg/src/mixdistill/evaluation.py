"""Scoring and analytics: accuracy, solvability overlap, report assembly.

All percentages are rounded to one decimal, half up, at the presentation
boundary only; intermediate math stays exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

from .core import Answer, answers_equivalent
from .errors import IncompleteRun, MissingGold


def round_pct(value: float) -> float:
    """One-decimal percentage, round half up (presentation rule)."""
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


class SolvabilityRule(str, Enum):
    MAJORITY_VOTE = "majority_vote"
    ANY_PATH = "any_path"


@dataclass(frozen=True)
class OverlapReport:
    """Four-way solvability partition, in percent."""

    dataset: str
    pct_both: float
    pct_cot_only: float
    pct_pot_only: float
    pct_neither: float
    solvability_rule: SolvabilityRule

    def __post_init__(self):
        parts = (self.pct_both, self.pct_cot_only, self.pct_pot_only, self.pct_neither)
        if not all(0 <= p <= 100 for p in parts):
            raise ValueError("percentages must lie in [0, 100]")
        if abs(sum(parts) - 100.0) > 0.01:
            raise ValueError(f"partition must sum to 100, got {sum(parts)}")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.pct_both, self.pct_cot_only, self.pct_pot_only, self.pct_neither)


def score(predictions: Sequence[tuple], gold_set: Mapping[str, Answer]) -> float:
    """Accuracy percent over (problem_id, Answer) predictions, one decimal."""
    if not predictions:
        return 0.0
    correct = 0
    for problem_id, answer in predictions:
        if problem_id not in gold_set:
            raise MissingGold(f"prediction for unknown problem {problem_id!r}")
        if answers_equivalent(answer, gold_set[problem_id]):
            correct += 1
    return round_pct(100.0 * correct / len(predictions))


def overlap_stats(
    per_problem: Sequence[tuple],
    rule: SolvabilityRule = SolvabilityRule.MAJORITY_VOTE,
    dataset: str = "",
) -> OverlapReport:
    """Partition (cot_solved, pot_solved) flags into the four-way overlap."""
    if not per_problem:
        raise ValueError("per_problem flags must be non-empty")
    n = len(per_problem)
    both = sum(1 for c, p in per_problem if c and p)
    cot_only = sum(1 for c, p in per_problem if c and not p)
    pot_only = sum(1 for c, p in per_problem if p and not c)
    neither = n - both - cot_only - pot_only
    return OverlapReport(
        dataset=dataset,
        pct_both=100.0 * both / n,
        pct_cot_only=100.0 * cot_only / n,
        pct_pot_only=100.0 * pot_only / n,
        pct_neither=100.0 * neither / n,
        solvability_rule=rule,
    )


# -- report assembly ----------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{round_pct(value):.1f}"


def report(run_dir, out_dir=None) -> dict:
    """Assemble markdown + CSV artifacts from a run directory.

    Expects, per dataset subdirectory: predictions.jsonl and run_meta.json.
    Raises IncompleteRun naming every missing file. Output is byte-stable
    for identical inputs (no timestamps).
    """
    from .inference import PredictionRecord, path_sweep

    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir / "report"

    dataset_dirs = sorted(d for d in run_dir.iterdir() if d.is_dir() and d != out_dir) if run_dir.exists() else []
    missing = []
    runs = []  # (meta, records)
    found_any = False
    for d in dataset_dirs:
        predictions = d / "predictions.jsonl"
        meta_path = d / "run_meta.json"
        if not predictions.exists() and not meta_path.exists():
            continue  # not an inference output directory
        found_any = True
        if not predictions.exists():
            missing.append(str(predictions))
        if not meta_path.exists():
            missing.append(str(meta_path))
        if predictions.exists() and meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            records = [
                PredictionRecord.from_row(json.loads(line))
                for line in predictions.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            runs.append((meta, records))
    if not found_any:
        missing.append(str(run_dir / "<dataset>" / "predictions.jsonl"))
        missing.append(str(run_dir / "<dataset>" / "run_meta.json"))
    if missing:
        raise IncompleteRun(sorted(missing))

    out_dir.mkdir(parents=True, exist_ok=True)
    runs.sort(key=lambda item: (item[0]["dataset"], item[0]["model"]))

    accuracy_rows = []  # model, dataset, mode, k, accuracy
    overlap_rows = []
    ablation_rows = []
    sweep_files = {}
    md_accuracy = []

    first_combined: dict = {}
    for meta, records in runs:
        model, dataset = meta["model"], meta["dataset"]
        gold = {r.problem_id: r.gold for r in records}
        accs = {}
        for mode in ("cot", "pot", "combined"):
            preds = [(r.problem_id, r.revote(mode)) for r in records]
            accs[mode] = score(preds, gold)
            k = {"cot": meta["n_cot"], "pot": meta["n_pot"]}.get(mode, meta["n_cot"] + meta["n_pot"])
            accuracy_rows.append((model, dataset, mode, k, accs[mode]))

        for rule in SolvabilityRule:
            flags = [(r.solved("cot", rule), r.solved("pot", rule)) for r in records]
            overlap_rows.append((dataset, model, rule.value, overlap_stats(flags, rule, dataset)))

        sweep_modes = tuple(m for m, n in (("cot", meta["n_cot"]), ("pot", meta["n_pot"])) if n)
        if len(sweep_modes) == 2:
            sweep_modes += ("combined",)
        available = [n for n in (meta["n_cot"], meta["n_pot"]) if n]
        if available:
            points = path_sweep(records, min(available), modes=sweep_modes)
            sweep_files.setdefault(dataset, []).extend(
                (model, mode, k, acc) for mode, k, acc in points
            )

        ablation_rows.append(
            (
                model,
                meta.get("train_dataset", dataset),
                meta.get("train_fraction", 1.0),
                dataset,
                accs["cot"],
                accs["pot"],
                accs["combined"],
            )
        )

        key = dataset
        if key in first_combined:
            delta = f"{accs['combined'] - first_combined[key]:+.1f}"
        else:
            first_combined[key] = accs["combined"]
            delta = "-"
        md_accuracy.append(
            f"| {model} | {dataset} | {_fmt(accs['cot'])} | {_fmt(accs['pot'])} "
            f"| {_fmt(accs['combined'])} | {delta} |"
        )

    paths = {}

    accuracy_csv = ["model,dataset,mode,k,accuracy"]
    accuracy_csv += [f"{m},{d},{mo},{k},{_fmt(a)}" for m, d, mo, k, a in accuracy_rows]
    paths["accuracy_csv"] = out_dir / "accuracy.csv"
    paths["accuracy_csv"].write_text("\n".join(accuracy_csv) + "\n", encoding="utf-8")

    overlap_csv = ["dataset,model,rule,pct_both,pct_cot_only,pct_pot_only,pct_neither"]
    for dataset, model, rule, rep in overlap_rows:
        overlap_csv.append(
            f"{dataset},{model},{rule},"
            + ",".join(_fmt(p) for p in rep.as_tuple())
        )
    paths["overlap_csv"] = out_dir / "overlap.csv"
    paths["overlap_csv"].write_text("\n".join(overlap_csv) + "\n", encoding="utf-8")

    for dataset, rows in sorted(sweep_files.items()):
        lines = ["model,mode,k,accuracy"]
        lines += [f"{model},{mode},{k},{_fmt(acc)}" for model, mode, k, acc in rows]
        sweep_path = out_dir / f"sweep_{dataset}.csv"
        sweep_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths[f"sweep_csv_{dataset}"] = sweep_path

    ablation_csv = ["model,train_dataset,train_fraction,eval_dataset,cot,pot,combined"]
    ablation_csv += [
        f"{m},{td},{tf},{ed},{_fmt(c)},{_fmt(p)},{_fmt(co)}"
        for m, td, tf, ed, c, p, co in ablation_rows
    ]
    paths["ablation_csv"] = out_dir / "ablation.csv"
    paths["ablation_csv"].write_text("\n".join(ablation_csv) + "\n", encoding="utf-8")

    md = ["# Run report", "", "## Accuracy", ""]
    md.append("| model | dataset | CoT | PoT | Combined | Δ combined |")
    md.append("|---|---|---|---|---|---|")
    md.extend(md_accuracy)
    md += ["", "## Solvability overlap", ""]
    md.append("| dataset | model | rule | both | CoT only | PoT only | neither |")
    md.append("|---|---|---|---|---|---|---|")
    for dataset, model, rule, rep in overlap_rows:
        md.append(
            f"| {dataset} | {model} | {rule} | " + " | ".join(_fmt(p) for p in rep.as_tuple()) + " |"
        )
    md += ["", "## Path sweep", ""]
    for dataset in sorted(sweep_files):
        md.append(f"- accuracy-vs-k rows in `sweep_{dataset}.csv`")
    md += ["", "## Ablation grid", ""]
    md.append("| model | train dataset | fraction | eval dataset | CoT | PoT | Combined |")
    md.append("|---|---|---|---|---|---|---|")
    for m, td, tf, ed, c, p, co in ablation_rows:
        md.append(f"| {m} | {td} | {tf} | {ed} | {_fmt(c)} | {_fmt(p)} | {_fmt(co)} |")
    paths["report_md"] = out_dir / "report.md"
    paths["report_md"].write_text("\n".join(md) + "\n", encoding="utf-8")
    return paths
