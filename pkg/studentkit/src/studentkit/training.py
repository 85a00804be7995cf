"""Reference multi-task trainer over weighted CoT/PoT records.

Each step computes per-task mean sequence losses and combines them with
the tasks' record weights: for a mixed file that is exactly
(1 - lambda) * L_cot + lambda * L_pot. Verification mode fixes the data
order and batches the whole file, so the decomposition is checkable
against independent single-task forward passes to the last ulp.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .model import build_model, collate, encode_example, per_example_loss
from .records import RecordSchemaError, TrainRecord, load_records, task_weights

PATH_TASKS = ("cot", "pot")


class DomainError(Exception):
    """A parameter escaped its mathematical domain."""


def mixed_loss(loss_cot: float, loss_pot: float, lambda_: float) -> float:
    """(1 - lambda) * loss_cot + lambda * loss_pot."""
    if not 0 <= lambda_ <= 1:
        raise DomainError(f"lambda must be in [0, 1], got {lambda_}")
    return (1 - lambda_) * loss_cot + lambda_ * loss_pot


@dataclass(frozen=True)
class TrainConfig:
    model_id: str = "tiny-gru"
    max_steps: int = 8000
    batch_size: int = 8
    learning_rate: float = 1e-3
    lambda_check: Optional[float] = None  # assert record weights realize this mixture
    seed: int = 0
    verification: bool = False  # fixed data order, full determinism

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class TrainResult:
    checkpoint_dir: Path
    trace: list  # rows: {"step", "loss_total", "loss_cot", "loss_pot"}

    @property
    def final_loss(self) -> float:
        return self.trace[-1]["loss_total"]


def _check_lambda(records, lambda_: float) -> None:
    weights = task_weights(records)
    expected = {"cot": 1 - lambda_, "pot": lambda_}
    for task, want in expected.items():
        got = weights.get(task)
        if got is not None and abs(got - want) > 1e-9:
            raise ValueError(
                f"records are not a lambda={lambda_} mixture: task {task} weight {got}"
            )


def batch_losses(model, records) -> dict:
    """Per-task mean loss over one batch of records (absent tasks excluded)."""
    encoded = [encode_example(r.input, r.target) for r in records]
    ids, mask = collate(encoded)
    losses = per_example_loss(model, ids, mask)
    by_task: dict = {}
    for index, record in enumerate(records):
        by_task.setdefault(record.task, []).append(losses[index])
    return {task: torch.stack(items).mean() for task, items in by_task.items()}


def weighted_total(task_losses: dict, weights: dict) -> torch.Tensor:
    """Sum of weight * task loss; tasks absent from the batch contribute zero."""
    total = None
    for task, loss in task_losses.items():
        term = weights.get(task, 1.0) * loss
        total = term if total is None else total + term
    if total is None:
        raise ValueError("batch carried no records")
    return total


def train(config: TrainConfig, records_path, out_dir) -> TrainResult:
    """Fit the tiny model on a record file; emits a checkpoint and loss trace."""
    records = load_records(records_path)
    if config.lambda_check is not None:
        _check_lambda(records, config.lambda_check)
    weights = task_weights(records)

    model = build_model(config.model_id, config.seed)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    order_rng = torch.Generator().manual_seed(config.seed)

    trace = []
    cursor = 0
    ordered = list(records)
    for step in range(1, config.max_steps + 1):
        if config.verification:
            batch = ordered[: config.batch_size] if config.batch_size < len(ordered) else ordered
        else:
            if cursor + config.batch_size > len(ordered):
                permutation = torch.randperm(len(ordered), generator=order_rng).tolist()
                ordered = [records[i] for i in permutation]
                cursor = 0
            batch = ordered[cursor : cursor + config.batch_size]
            cursor += config.batch_size
            if not batch:
                batch = ordered

        task_losses = batch_losses(model, batch)
        total = weighted_total(task_losses, weights)
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        trace.append(
            {
                "step": step,
                "loss_total": float(total.detach()),
                "loss_cot": float(task_losses["cot"].detach()) if "cot" in task_losses else 0.0,
                "loss_pot": float(task_losses["pot"].detach()) if "pot" in task_losses else 0.0,
            }
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "model.pt")
    (out_dir / "train_config.json").write_text(
        json.dumps(dataclasses.asdict(config), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    lines = ["step,loss_total,loss_cot,loss_pot"]
    lines += [
        f"{row['step']},{row['loss_total']:.8f},{row['loss_cot']:.8f},{row['loss_pot']:.8f}"
        for row in trace
    ]
    (out_dir / "trace.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return TrainResult(checkpoint_dir=out_dir, trace=trace)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="train a tiny student on weighted records")
    parser.add_argument("--records", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--model", default="tiny-gru")
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lambda-check", type=float, default=None)
    parser.add_argument("--verification", action="store_true")
    args = parser.parse_args(argv)
    config = TrainConfig(
        model_id=args.model,
        max_steps=args.steps,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        lambda_check=args.lambda_check,
        seed=args.seed,
        verification=args.verification,
    )
    try:
        result = train(config, args.records, args.out)
    except (RecordSchemaError, ValueError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"final loss {result.final_loss:.6f}; checkpoint at {result.checkpoint_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
