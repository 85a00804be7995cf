#!/usr/bin/env python3
"""Train-set-size ablation: run the pipeline at several training fractions.

For each fraction the extraction/filter/build stages see a seeded subsample
of the training split; inference and scoring run as usual, and a combined
summary lands in <out>/ablation_summary.csv. Against real endpoints this
reproduces the data-scaling experiment shape; against the bundled mocks it
exercises the mechanics only (a scripted student does not learn).

Usage:
    python scripts/train_size_ablation.py --config configs/mock.yaml \
        --fractions 0.2 0.4 0.6 0.8 1.0 --out runs/ablation
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from mixdistill.cli import (
    stage_build,
    stage_eval,
    stage_extract,
    stage_filter,
    stage_infer,
    stage_report,
)
from mixdistill.config import load_config


def run(config_path: str, fractions, out_root: Path) -> int:
    base = load_config(config_path)
    summary = ["model,fraction,dataset,cot,pot,combined"]
    for fraction in fractions:
        label = f"{base.label}-{int(round(fraction * 100))}pct"
        datasets = tuple(
            dataclasses.replace(d, train_fraction=fraction) for d in base.datasets
        )
        config = dataclasses.replace(
            base, label=label, datasets=datasets, out_dir=str(out_root / label)
        )
        run_dir = Path(config.out_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        print(f"== fraction {fraction}")
        stage_extract(config, run_dir)
        stage_filter(config, run_dir)
        stage_build(config, run_dir)
        stage_infer(config, run_dir)
        stage_eval(config, run_dir)
        stage_report(config, run_dir)
        for ds in config.datasets:
            scores = json.loads((run_dir / ds.name.value / "scores.json").read_text())
            acc = scores["accuracy"]
            summary.append(
                f"{label},{fraction},{ds.name.value},{acc['cot']},{acc['pot']},{acc['combined']}"
            )
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "ablation_summary.csv").write_text("\n".join(summary) + "\n")
    print(f"wrote {out_root / 'ablation_summary.csv'}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", required=True)
    parser.add_argument("--fractions", nargs="+", type=float, default=[0.2, 0.4, 0.6, 0.8, 1.0])
    parser.add_argument("--out", default="runs/ablation")
    args = parser.parse_args()
    sys.exit(run(args.config, args.fractions, Path(args.out)))
