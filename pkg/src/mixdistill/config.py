"""Declarative run configuration: one YAML file drives the whole pipeline.

Relative paths inside a config resolve against the config file's directory.
Secrets never live in the file; endpoints name an environment variable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Tuple

import yaml

from .builder import BuildMode, Selection
from .client import SamplingParams
from .core import Dataset
from .errors import ConfigError
from .filtering import FilterPolicy
from .sandbox import ExecLimits


@dataclass(frozen=True)
class EndpointConfig:
    id: str
    kind: str = "http"  # http | mock
    model: str = "mock-model"
    base_url: str = ""
    api_key_env: Optional[str] = None
    script: Optional[str] = None  # mock script path

    def __post_init__(self):
        if self.kind not in ("http", "mock"):
            raise ConfigError(f"endpoint {self.id}: unknown kind {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ConfigError(f"endpoint {self.id}: http endpoints need base_url")


@dataclass(frozen=True)
class DatasetConfig:
    name: Dataset
    train_path: str
    test_path: str
    train_fraction: float = 1.0
    train_dataset_label: Optional[str] = None  # OOD runs: where the student was trained

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ConfigError(f"dataset {self.name.value}: train_fraction must be in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    label: str
    out_dir: str
    datasets: Tuple[DatasetConfig, ...]
    teacher: EndpointConfig
    student: EndpointConfig
    seed: int = 0
    teacher_sampling: SamplingParams = SamplingParams(temperature=0.7, top_p=0.95)
    student_sampling: SamplingParams = SamplingParams(temperature=0.7, top_p=0.95)
    extract_n_cot: int = 4
    extract_n_pot: int = 4
    infer_n_cot: int = 10
    infer_n_pot: int = 10
    build_mode: BuildMode = BuildMode.MIXED
    lambda_: float = 0.5
    selection: Selection = Selection.FIRST
    best_n: int = 1
    resample: Optional[int] = None  # emit weight-1 replicated records instead of weights
    require_gold_match: bool = True
    keep_rejects: bool = True
    exec_limits: ExecLimits = ExecLimits()
    exec_parallelism: int = 4
    max_in_flight: int = 4
    max_retries: int = 3
    max_requests: Optional[int] = None

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if not 0 <= self.lambda_ <= 1:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.extract_n_cot + self.extract_n_pot < 1:
            raise ConfigError("extraction needs at least one sample per problem")

    def filter_policy(self) -> FilterPolicy:
        return FilterPolicy(require_gold_match=self.require_gold_match, keep_rejects=self.keep_rejects)

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _sampling(raw: dict) -> SamplingParams:
    allowed = {"temperature", "top_p", "max_tokens", "n_samples", "stop"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown sampling keys: {sorted(unknown)}")
    if "stop" in raw and raw["stop"] is not None:
        raw = {**raw, "stop": tuple(raw["stop"])}
    return SamplingParams(**raw)


def _endpoint(name: str, raw: dict, base_dir: Path) -> EndpointConfig:
    script = raw.get("script")
    if script:
        script = str((base_dir / script).resolve())
    return EndpointConfig(
        id=raw.get("id", name),
        kind=raw.get("kind", "http"),
        model=raw.get("model", "mock-model"),
        base_url=raw.get("base_url", ""),
        api_key_env=raw.get("api_key_env"),
        script=script,
    )


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run config; raises ConfigError on any defect."""
    path = Path(path)
    base_dir = path.parent.resolve()
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} is not a mapping")

    def resolve(p: str) -> str:
        return str((base_dir / p).resolve())

    try:
        datasets = []
        for entry in raw["datasets"]:
            datasets.append(
                DatasetConfig(
                    name=Dataset(entry["name"]),
                    train_path=resolve(entry["train_path"]),
                    test_path=resolve(entry["test_path"]),
                    train_fraction=float(entry.get("train_fraction", 1.0)),
                    train_dataset_label=entry.get("train_dataset_label"),
                )
            )
        endpoints = raw["endpoints"]
        exec_raw = raw.get("exec", {})
        limits = ExecLimits(
            wall_timeout_ms=int(exec_raw.get("wall_timeout_ms", 5000)),
            max_output_bytes=int(exec_raw.get("max_output_bytes", 64 * 1024)),
            mem_limit_mb=int(exec_raw.get("mem_limit_mb", 512)),
        )
        build_raw = raw.get("build", {})
        infer_raw = raw.get("infer", {})
        extract_raw = raw.get("extract", {})
        filter_raw = raw.get("filter", {})
        client_raw = raw.get("client", {})
        config = RunConfig(
            label=str(raw.get("label", "run")),
            out_dir=resolve(raw.get("out_dir", "runs/latest")),
            datasets=tuple(datasets),
            teacher=_endpoint("teacher", endpoints["teacher"], base_dir),
            student=_endpoint("student", endpoints["student"], base_dir),
            seed=int(raw.get("seed", 0)),
            teacher_sampling=_sampling(extract_raw.get("sampling", {"temperature": 0.7, "top_p": 0.95})),
            student_sampling=_sampling(infer_raw.get("sampling", {"temperature": 0.7, "top_p": 0.95})),
            extract_n_cot=int(extract_raw.get("n_cot", 4)),
            extract_n_pot=int(extract_raw.get("n_pot", 4)),
            infer_n_cot=int(infer_raw.get("n_cot", 10)),
            infer_n_pot=int(infer_raw.get("n_pot", 10)),
            build_mode=BuildMode(build_raw.get("mode", "mixed")),
            lambda_=float(build_raw.get("lambda", 0.5)),
            selection=Selection(build_raw.get("selection", "first")),
            best_n=int(build_raw.get("best_n", 1)),
            resample=build_raw.get("resample"),
            require_gold_match=bool(filter_raw.get("require_gold_match", True)),
            keep_rejects=bool(filter_raw.get("keep_rejects", True)),
            exec_limits=limits,
            exec_parallelism=int(exec_raw.get("parallelism", 4)),
            max_in_flight=int(client_raw.get("max_in_flight", 4)),
            max_retries=int(client_raw.get("max_retries", 3)),
            max_requests=client_raw.get("max_requests"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config {path}: {exc!r}") from exc
    return config
