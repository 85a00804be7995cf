"""Program runner executed inside a fresh isolated interpreter.

Wire protocol: one JSON request on stdin {"code": str, "timeout_ms": int};
one JSON response line on stdout {"status", "answer", "stderr", "wall_ms"};
exit code 0 whenever the protocol itself succeeded, regardless of program
status. Optional argv: [mem_limit_mb].

Runs as a plain script under ``python -I``: stdlib only, no package
imports. The orchestrator in sandbox.py enforces the hard wall-clock kill;
the in-process alarm here exists to produce graceful Timeout responses.
"""

import io
import json
import os
import sys
import time
import traceback

STDERR_EXCERPT_CHARS = 2000
STDOUT_SINK_CAP = 1 << 20


class _ProgramTimeout(BaseException):
    """Raised by the alarm; BaseException so user 'except Exception' cannot eat it."""


class _CappedSink(io.TextIOBase):
    """Absorbs program prints; the protocol channel stays clean."""

    def __init__(self):
        self.size = 0

    def write(self, text):
        self.size += len(text)
        return len(text)

    def flush(self):
        pass


def _apply_rlimits(timeout_ms, mem_limit_mb):
    try:
        import resource
    except ImportError:  # pragma: no cover - POSIX-only toolkit
        return
    try:
        limit = mem_limit_mb << 20
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
        cpu = max(1, timeout_ms // 1000 + 1)
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
    except (ValueError, OSError):
        pass


def _install_guards(workdir, allow_network):
    """Refuse network connects and file writes outside the working directory.

    Guards cover the Python file APIs (builtins/io/pathlib/os); this is the
    documented isolation level, not a container substitute.
    """
    import builtins
    import io
    import pathlib
    import socket

    if not allow_network:
        def _no_network(*args, **kwargs):
            raise PermissionError("network access is disabled in the sandbox")

        socket.socket = _no_network
        socket.create_connection = _no_network
        socket.socketpair = _no_network

    root = os.path.realpath(workdir)

    def _inside(path):
        resolved = os.path.realpath(os.fspath(path))
        return resolved == root or resolved.startswith(root + os.sep)

    def _deny(path, operation):
        raise PermissionError(f"{operation} outside the sandbox workdir: {path}")

    real_open = builtins.open
    real_os_open = os.open
    real_remove, real_unlink = os.remove, os.unlink
    real_rename, real_replace = os.rename, os.replace
    real_mkdir, real_rmdir = os.mkdir, os.rmdir

    def guarded_open(file, mode="r", *args, **kwargs):
        if isinstance(file, int):
            return real_open(file, mode, *args, **kwargs)
        if any(flag in mode for flag in "wax+") and not _inside(file):
            _deny(file, "file write")
        return real_open(file, mode, *args, **kwargs)

    write_flags = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND

    def guarded_os_open(path, flags, *args, **kwargs):
        if flags & write_flags and not _inside(path):
            _deny(path, "file write")
        return real_os_open(path, flags, *args, **kwargs)

    def _guarded_unary(real, operation):
        def wrapper(path, *args, **kwargs):
            if not _inside(path):
                _deny(path, operation)
            return real(path, *args, **kwargs)

        return wrapper

    def _guarded_binary(real, operation):
        def wrapper(src, dst, *args, **kwargs):
            if not _inside(src) or not _inside(dst):
                _deny(dst, operation)
            return real(src, dst, *args, **kwargs)

        return wrapper

    builtins.open = guarded_open
    io.open = guarded_open
    # pathlib binds io.open at class-definition time; patch the accessor too
    accessor = getattr(pathlib, "_normal_accessor", None)
    if accessor is not None and hasattr(accessor, "open"):
        type(accessor).open = staticmethod(guarded_open)
    elif hasattr(pathlib.Path, "open"):
        real_path_open = pathlib.Path.open

        def guarded_path_open(self, mode="r", *args, **kwargs):
            if any(flag in mode for flag in "wax+") and not _inside(self):
                _deny(self, "file write")
            return real_path_open(self, mode, *args, **kwargs)

        pathlib.Path.open = guarded_path_open
    os.open = guarded_os_open
    os.remove = _guarded_unary(real_remove, "remove")
    os.unlink = _guarded_unary(real_unlink, "unlink")
    os.mkdir = _guarded_unary(real_mkdir, "mkdir")
    os.rmdir = _guarded_unary(real_rmdir, "rmdir")
    os.rename = _guarded_binary(real_rename, "rename")
    os.replace = _guarded_binary(real_replace, "replace")


def _render_answer(value):
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_program(code, timeout_ms):
    """Execute program text; returns the response dict (see module docstring)."""
    import signal

    def _on_alarm(signum, frame):
        raise _ProgramTimeout()

    signal.signal(signal.SIGALRM, _on_alarm)
    signal.setitimer(signal.ITIMER_REAL, timeout_ms / 1000.0)

    real_stdout = sys.stdout
    sys.stdout = _CappedSink()
    status, answer, stderr_text = "Ok", None, ""
    namespace = {"__name__": "__main__"}
    started = time.monotonic()
    try:
        exec(compile(code, "<program>", "exec"), namespace)
    except _ProgramTimeout:
        status = "Timeout"
    except MemoryError:
        status, stderr_text = "ExecError", "MemoryError"
    except BaseException:
        status = "ExecError"
        stderr_text = traceback.format_exc(limit=8)
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        sys.stdout = real_stdout
    wall_ms = int((time.monotonic() - started) * 1000)

    if status == "Ok":
        if "answer" in namespace:
            try:
                answer = _render_answer(namespace["answer"])
            except BaseException:
                status, stderr_text = "ExecError", "answer value could not be rendered"
        else:
            status = "ExecError"
            stderr_text = "program did not bind a variable named 'answer'"
    return {
        "status": status,
        "answer": answer,
        "stderr": stderr_text[-STDERR_EXCERPT_CHARS:],
        "wall_ms": wall_ms,
    }


def main():
    real_stdout = sys.stdout
    try:
        mem_limit_mb = int(sys.argv[1]) if len(sys.argv) > 1 else 512
        allow_network = len(sys.argv) > 2 and sys.argv[2] == "allow-network"
        request = json.loads(sys.stdin.readline())
        code = request["code"]
        timeout_ms = int(request.get("timeout_ms", 5000))
        _apply_rlimits(timeout_ms, mem_limit_mb)
        _install_guards(os.getcwd(), allow_network)
        response = run_program(code, timeout_ms)
    except BaseException:
        response = {
            "status": "ExecError",
            "answer": None,
            "stderr": traceback.format_exc(limit=4)[-STDERR_EXCERPT_CHARS:],
            "wall_ms": 0,
        }
    real_stdout.write(json.dumps(response) + "\n")
    real_stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
