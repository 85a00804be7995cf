"""Isolated execution of untrusted program text.

Each program runs in a fresh ``python -I`` subprocess in its own session
and temp working directory, talking the one-request wire protocol of
pyrunner.py. The parent enforces the hard wall-clock kill; rlimits and the
network/filesystem guards live inside the runner. Container-grade isolation
is a deployment concern, not provided here.
"""

from __future__ import annotations

import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple

from .errors import SandboxSetupError

GRACE_MS = 500
# Parent kill fires this long after the program's wall budget, leaving the
# runner's in-process alarm room to answer gracefully first.
_KILL_SLACK_MS = 350

_RUNNER_PATH = Path(__file__).parent / "pyrunner.py"


class ExecStatus(str, Enum):
    OK = "Ok"
    EXEC_ERROR = "ExecError"
    TIMEOUT = "Timeout"
    OUTPUT_OVERFLOW = "OutputOverflow"


@dataclass(frozen=True)
class ExecLimits:
    wall_timeout_ms: int = 5000
    max_output_bytes: int = 64 * 1024
    workdir: Optional[str] = None  # parent dir for per-call temp dirs
    allow_network: bool = False
    mem_limit_mb: int = 512
    runner_cmd: Optional[Tuple[str, ...]] = None  # external runner override

    def __post_init__(self):
        if self.wall_timeout_ms <= 0:
            raise ValueError("wall_timeout_ms must be positive")


@dataclass(frozen=True)
class ExecutionResult:
    status: ExecStatus
    answer_raw: Optional[str]
    stderr_excerpt: str
    wall_ms: int

    def __post_init__(self):
        if (self.status is ExecStatus.OK) != (self.answer_raw is not None):
            raise ValueError("status Ok iff answer_raw present")


def _runner_command(limits: ExecLimits) -> list:
    if limits.runner_cmd:
        return list(limits.runner_cmd)
    if not _RUNNER_PATH.exists():  # pragma: no cover - packaging defect
        raise SandboxSetupError(f"bundled runner missing at {_RUNNER_PATH}")
    cmd = [sys.executable, "-I", str(_RUNNER_PATH), str(limits.mem_limit_mb)]
    if limits.allow_network:
        cmd.append("allow-network")
    return cmd


def _kill_session(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        pass
    try:
        proc.kill()
    except OSError:
        pass


def execute(program: str, limits: ExecLimits = ExecLimits()) -> ExecutionResult:
    """Run one program to completion and classify the outcome."""
    workdir = tempfile.mkdtemp(prefix="mixdistill-exec-", dir=limits.workdir)
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": workdir,
        "TMPDIR": workdir,
        "LC_ALL": "C.UTF-8",
    }
    request = json.dumps({"code": program, "timeout_ms": limits.wall_timeout_ms}) + "\n"
    started = time.monotonic()
    deadline = started + limits.wall_timeout_ms / 1000.0 + _KILL_SLACK_MS / 1000.0
    try:
        try:
            proc = subprocess.Popen(
                _runner_command(limits),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                cwd=workdir,
                env=env,
                start_new_session=True,
                text=True,
            )
        except OSError as exc:
            raise SandboxSetupError(f"cannot start runner: {exc}") from exc

        killed = False
        try:
            stdout, _ = proc.communicate(request, timeout=max(0.05, deadline - time.monotonic()))
        except subprocess.TimeoutExpired:
            killed = True
            _kill_session(proc)
            stdout, _ = proc.communicate()
        finally:
            if proc.poll() is None:
                _kill_session(proc)
                proc.wait()
        wall_ms = int((time.monotonic() - started) * 1000)

        if killed:
            return ExecutionResult(ExecStatus.TIMEOUT, None, "killed at wall timeout", wall_ms)
        if len(stdout.encode("utf-8", "replace")) > limits.max_output_bytes:
            return ExecutionResult(
                ExecStatus.OUTPUT_OVERFLOW, None, "runner output over budget", wall_ms
            )
        try:
            response = json.loads(stdout.strip().splitlines()[-1])
            status = ExecStatus(response["status"])
            answer = response.get("answer")
            stderr_excerpt = response.get("stderr", "")
        except (ValueError, IndexError, KeyError):
            return ExecutionResult(
                ExecStatus.EXEC_ERROR, None, f"malformed runner response: {stdout[:200]!r}", wall_ms
            )
        if status is ExecStatus.OK and answer is None:
            status, stderr_excerpt = ExecStatus.EXEC_ERROR, "runner reported Ok without answer"
        if status is not ExecStatus.OK:
            answer = None
        return ExecutionResult(status, answer, stderr_excerpt, wall_ms)
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def execute_many(
    programs: Sequence[str], limits: ExecLimits = ExecLimits(), parallelism: int = 4
) -> list:
    """Execute programs concurrently; results align positionally with inputs."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if not programs:
        return []
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda p: execute(p, limits), programs))
