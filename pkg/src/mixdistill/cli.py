"""Pipeline CLI: extract, filter, build, infer, eval, report, pipeline.

Every stage writes its JSONL artifacts plus a stage manifest (config hash,
input hashes, tool version) into the run directory; re-running a stage
whose manifest still matches is a no-op. Exit codes: 0 ok, 2 config,
3 missing stage dependency, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .builder import (
    BuildMode,
    DistillRecord,
    build,
    read_records_jsonl,
    resample_records,
    write_records_jsonl,
)
from .client import ChatClient, EndpointSpec
from .config import DatasetConfig, EndpointConfig, RunConfig, load_config
from .core import Dataset, Mode, ReasoningPath
from .datasets import Split, load_dataset, read_problems_jsonl, subsample, write_problems_jsonl
from .errors import ConfigError, IncompleteRun, MixdistillError, StageDependencyMissing
from .evaluation import SolvabilityRule, overlap_stats, report as build_report, score
from .filtering import classify_generations
from .inference import PredictionRecord, bundle_to_record, sample_paths
from .mock_endpoint import MockEndpoint, MockScript
from .prompts import default_template, render_extraction_prompt

EXIT_OK, EXIT_CONFIG, EXIT_DEPENDENCY, EXIT_RUNTIME = 0, 2, 3, 4

STAGES = ("extract", "filter", "build", "infer", "eval", "report")


def _hash_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config_hash(config: RunConfig) -> str:
    payload = dataclasses.asdict(config)
    payload.pop("out_dir", None)  # relocating a run must not dirty its stages
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _manifest_path(stage_dir: Path, stage: str) -> Path:
    return stage_dir / f"{stage}.manifest.json"


def _stage_fresh(stage_dir: Path, stage: str, config_hash: str, inputs: dict) -> bool:
    path = _manifest_path(stage_dir, stage)
    if not path.exists():
        return False
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("config_hash") != config_hash or manifest.get("inputs") != inputs:
        return False
    return all((stage_dir / name).exists() for name in manifest.get("outputs", []))


def _write_manifest(stage_dir: Path, stage: str, config_hash: str, inputs: dict, outputs: list):
    manifest = {
        "stage": stage,
        "tool_version": __version__,
        "config_hash": config_hash,
        "inputs": inputs,
        "outputs": outputs,
    }
    _manifest_path(stage_dir, stage).write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )


def _require_stage(stage_dir: Path, needed: str, stage: str):
    if not _manifest_path(stage_dir, needed).exists():
        raise StageDependencyMissing(stage, needed)


@contextmanager
def _endpoint_spec(cfg: EndpointConfig):
    """HTTP endpoints pass through; mock endpoints get a live loopback server."""
    if cfg.kind == "mock":
        script = MockScript.from_file(cfg.script) if cfg.script else MockScript()
        with MockEndpoint(script) as server:
            yield EndpointSpec(cfg.id, server.base_url, cfg.model, cfg.api_key_env)
    else:
        yield EndpointSpec(cfg.id, cfg.base_url, cfg.model, cfg.api_key_env)


def _client(config: RunConfig, spec: EndpointSpec, out_root: Path) -> ChatClient:
    return ChatClient(
        spec,
        cache_dir=out_root / "cache" / spec.id,
        max_in_flight=config.max_in_flight,
        max_retries=config.max_retries,
        max_requests=config.max_requests,
    )


def _dataset_dir(out_root: Path, ds: DatasetConfig) -> Path:
    d = out_root / ds.name.value
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_jsonl(path: Path, rows) -> None:
    lines = [json.dumps(row, ensure_ascii=False) for row in rows]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _read_jsonl(path: Path) -> list:
    return [
        json.loads(line)
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


# -- stages --------------------------------------------------------------------


def stage_extract(config: RunConfig, out_root: Path) -> None:
    chash = _config_hash(config)
    pending = []
    for ds in config.datasets:
        stage_dir = _dataset_dir(out_root, ds)
        inputs = {"train_file": _hash_file(ds.train_path)}
        if _stage_fresh(stage_dir, "extract", chash, inputs):
            print(f"[extract] {ds.name.value}: up to date")
            continue
        pending.append((ds, stage_dir, inputs))
    if not pending:
        return
    with _endpoint_spec(config.teacher) as spec:
        with _client(config, spec, out_root) as client:
            for ds, stage_dir, inputs in pending:
                problems = load_dataset(ds.name, Split.TRAIN, ds.train_path)
                problems = subsample(problems, ds.train_fraction, config.seed)
                write_problems_jsonl(problems, stage_dir / "problems_train.jsonl")

                templates = {
                    mode: default_template(ds.name.family, mode) for mode in Mode
                }
                jobs = []  # (problem, mode, prompt, n)
                for problem in problems.problems:
                    if config.extract_n_cot:
                        jobs.append((problem, Mode.COT, config.extract_n_cot))
                    if config.extract_n_pot:
                        jobs.append((problem, Mode.POT, config.extract_n_pot))
                rows = []
                prompts = [
                    render_extraction_prompt(templates[mode], problem)
                    for problem, mode, _ in jobs
                ]
                batches = []
                for (problem, mode, n), prompt in zip(jobs, prompts):
                    params = dataclasses.replace(config.teacher_sampling, n_samples=n)
                    batches.append(client.sample(prompt, params))
                for (problem, mode, _), batch in zip(jobs, batches):
                    for text in batch.texts:
                        rows.append(
                            {
                                "problem_id": problem.id,
                                "dataset": ds.name.value,
                                "mode": mode.value,
                                "text": text,
                            }
                        )
                _write_jsonl(stage_dir / "generations.jsonl", rows)
                _write_manifest(
                    stage_dir, "extract", chash, inputs,
                    ["generations.jsonl", "problems_train.jsonl"],
                )
                print(f"[extract] {ds.name.value}: {len(rows)} generations")


def stage_filter(config: RunConfig, out_root: Path) -> None:
    chash = _config_hash(config)
    for ds in config.datasets:
        stage_dir = _dataset_dir(out_root, ds)
        _require_stage(stage_dir, "extract", "filter")
        inputs = {"generations": _hash_file(stage_dir / "generations.jsonl")}
        if _stage_fresh(stage_dir, "filter", chash, inputs):
            print(f"[filter] {ds.name.value}: up to date")
            continue
        problems = {p.id: p for p in read_problems_jsonl(stage_dir / "problems_train.jsonl")}
        generations = [
            (problems[row["problem_id"]], Mode(row["mode"]), row["text"])
            for row in _read_jsonl(stage_dir / "generations.jsonl")
        ]
        classified = classify_generations(
            generations, config.filter_policy(), config.exec_limits, config.exec_parallelism
        )
        kept = classified if config.keep_rejects else [c for c in classified if c.accepted]
        _write_jsonl(stage_dir / "paths.jsonl", [c.to_row() for c in kept])
        rejections = {}
        for c in classified:
            if not c.accepted:
                rejections[c.reject_reason.value] = rejections.get(c.reject_reason.value, 0) + 1
        report_payload = {
            "total": len(classified),
            "accepted": sum(c.accepted for c in classified),
            "rejections": rejections,
        }
        (stage_dir / "filter_report.json").write_text(
            json.dumps(report_payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(stage_dir, "filter", chash, inputs, ["paths.jsonl", "filter_report.json"])
        print(f"[filter] {ds.name.value}: accepted {report_payload['accepted']}/{report_payload['total']}")


def stage_build(config: RunConfig, out_root: Path) -> None:
    chash = _config_hash(config)
    for ds in config.datasets:
        stage_dir = _dataset_dir(out_root, ds)
        _require_stage(stage_dir, "filter", "build")
        inputs = {"paths": _hash_file(stage_dir / "paths.jsonl")}
        if _stage_fresh(stage_dir, "build", chash, inputs):
            print(f"[build] {ds.name.value}: up to date")
            continue
        problems = read_problems_jsonl(stage_dir / "problems_train.jsonl")
        accepted = [
            ReasoningPath.from_row(row)
            for row in _read_jsonl(stage_dir / "paths.jsonl")
            if row["accepted"]
        ]
        records, manifest = build(
            accepted,
            problems,
            mode=config.build_mode,
            lambda_=config.lambda_,
            selection=config.selection,
            best_n=config.best_n,
        )
        if config.resample:
            records = resample_records(records, config.resample)
        write_records_jsonl(records, stage_dir / "train.jsonl")
        (stage_dir / "build_manifest.json").write_text(
            json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(stage_dir, "build", chash, inputs, ["train.jsonl", "build_manifest.json"])
        print(f"[build] {ds.name.value}: {len(records)} records (lambda={config.lambda_})")


def stage_infer(config: RunConfig, out_root: Path, endpoint_override: EndpointSpec = None) -> None:
    chash = _config_hash(config)
    pending = []
    for ds in config.datasets:
        stage_dir = _dataset_dir(out_root, ds)
        if endpoint_override is None:
            _require_stage(stage_dir, "build", "infer")
        inputs = {"test_file": _hash_file(ds.test_path)}
        if _stage_fresh(stage_dir, "infer", chash, inputs):
            print(f"[infer] {ds.name.value}: up to date")
            continue
        pending.append((ds, stage_dir, inputs))
    if not pending:
        return

    @contextmanager
    def student_spec():
        if endpoint_override is not None:
            yield endpoint_override
        else:
            with _endpoint_spec(config.student) as spec:
                yield spec

    with student_spec() as spec:
        with _client(config, spec, out_root) as client:
            for ds, stage_dir, inputs in pending:
                problems = load_dataset(ds.name, Split.TEST, ds.test_path)
                write_problems_jsonl(problems, stage_dir / "problems_test.jsonl")
                mode_config = {
                    "label": config.label,
                    "n_cot": config.infer_n_cot,
                    "n_pot": config.infer_n_pot,
                }
                rows = []
                for problem in problems.problems:
                    bundle = sample_paths(
                        problem,
                        client,
                        n_cot=config.infer_n_cot,
                        n_pot=config.infer_n_pot,
                        params=config.student_sampling,
                        limits=config.exec_limits,
                        policy=config.filter_policy(),
                        exec_parallelism=config.exec_parallelism,
                    )
                    rows.append(bundle_to_record(bundle, problem, mode_config).to_row())
                _write_jsonl(stage_dir / "predictions.jsonl", rows)
                meta = {
                    "model": config.label,
                    "dataset": ds.name.value,
                    "n_cot": config.infer_n_cot,
                    "n_pot": config.infer_n_pot,
                    "train_dataset": ds.train_dataset_label or ds.name.value,
                    "train_fraction": ds.train_fraction,
                    "lambda": config.lambda_,
                    "build_mode": config.build_mode.value,
                }
                (stage_dir / "run_meta.json").write_text(
                    json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8"
                )
                _write_manifest(
                    stage_dir, "infer", chash, inputs,
                    ["predictions.jsonl", "problems_test.jsonl", "run_meta.json"],
                )
                correct = sum(1 for r in rows if r["correct"])
                print(f"[infer] {ds.name.value}: {correct}/{len(rows)} correct")


def stage_eval(config: RunConfig, out_root: Path) -> None:
    chash = _config_hash(config)
    for ds in config.datasets:
        stage_dir = _dataset_dir(out_root, ds)
        _require_stage(stage_dir, "infer", "eval")
        inputs = {"predictions": _hash_file(stage_dir / "predictions.jsonl")}
        if _stage_fresh(stage_dir, "eval", chash, inputs):
            print(f"[eval] {ds.name.value}: up to date")
            continue
        records = [PredictionRecord.from_row(row) for row in _read_jsonl(stage_dir / "predictions.jsonl")]
        gold = {r.problem_id: r.gold for r in records}
        accuracy = {
            mode: score([(r.problem_id, r.revote(mode)) for r in records], gold)
            for mode in ("cot", "pot", "combined")
        }
        overlap = {}
        for rule in SolvabilityRule:
            flags = [(r.solved("cot", rule), r.solved("pot", rule)) for r in records]
            overlap[rule.value] = overlap_stats(flags, rule, ds.name.value).as_tuple()
        payload = {"accuracy": accuracy, "overlap": overlap}
        (stage_dir / "scores.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(stage_dir, "eval", chash, inputs, ["scores.json"])
        print(f"[eval] {ds.name.value}: combined accuracy {accuracy['combined']}")


def stage_report(config: RunConfig, out_root: Path) -> None:
    for ds in config.datasets:
        _require_stage(_dataset_dir(out_root, ds), "infer", "report")
    paths = build_report(out_root)
    print(f"[report] wrote {len(paths)} artifacts under {out_root / 'report'}")


_STAGE_FUNCS = {
    "extract": stage_extract,
    "filter": stage_filter,
    "build": stage_build,
    "eval": stage_eval,
    "report": stage_report,
}


# -- entry point ---------------------------------------------------------------


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    updates = {}
    if args.out:
        updates["out_dir"] = str(Path(args.out).resolve())
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "lambda_", None) is not None:
        updates["lambda_"] = args.lambda_
    if getattr(args, "mode", None):
        updates["build_mode"] = BuildMode(args.mode)
    if getattr(args, "resample", None) is not None:
        updates["resample"] = args.resample
    if getattr(args, "n_cot", None) is not None:
        updates["infer_n_cot"] = args.n_cot
    if getattr(args, "n_pot", None) is not None:
        updates["infer_n_pot"] = args.n_pot
    if args.dataset:
        selected = tuple(d for d in config.datasets if d.name.value == args.dataset)
        if not selected:
            raise ConfigError(f"dataset {args.dataset!r} not present in config")
        updates["datasets"] = selected
    return dataclasses.replace(config, **updates) if updates else config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixdistill",
        description="CoT/PoT distillation pipeline: extraction, filtering, data building, "
        "multi-path inference, evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "pipeline" else "run all stages")
        p.add_argument("--config", required=True, help="run config YAML")
        p.add_argument("--out", help="override the config's output root")
        p.add_argument("--dataset", help="restrict to one dataset from the config")
        p.add_argument("--seed", type=int, default=None)
        if name in ("build", "pipeline"):
            p.add_argument("--lambda", dest="lambda_", type=float, default=None)
            p.add_argument("--mode", choices=[m.value for m in BuildMode], default=None)
            p.add_argument("--resample", type=int, default=None,
                           help="replicate records at weight 1 instead of weighting")
        if name in ("infer", "pipeline"):
            p.add_argument("--n-cot", dest="n_cot", type=int, default=None)
            p.add_argument("--n-pot", dest="n_pot", type=int, default=None)
            p.add_argument("--endpoint", help="student endpoint base URL override (waives the build dependency)")
            p.add_argument("--model", default="student", help="model name for --endpoint")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
        out_root = Path(config.out_dir)
        out_root.mkdir(parents=True, exist_ok=True)

        override = None
        if getattr(args, "endpoint", None):
            override = EndpointSpec("student-override", args.endpoint, args.model)

        if args.command == "pipeline":
            stage_extract(config, out_root)
            stage_filter(config, out_root)
            stage_build(config, out_root)
            stage_infer(config, out_root, override)
            stage_eval(config, out_root)
            stage_report(config, out_root)
        elif args.command == "infer":
            stage_infer(config, out_root, override)
        else:
            _STAGE_FUNCS[args.command](config, out_root)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageDependencyMissing as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (MixdistillError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
