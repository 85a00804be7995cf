"""Standalone program runner speaking the executor wire protocol.

One JSON request per process on stdin: {"code": str, "timeout_ms": int}.
One JSON response line on stdout: {"status": "Ok"|"ExecError"|"Timeout",
"answer": str|null, "stderr": str, "wall_ms": int}. Exit code 0 whenever a
response was produced, whatever happened to the program. The program's own
prints are swallowed so nothing but the response reaches stdout; its
answer is the final value bound to the name `answer`.

Run it as `python -m studentkit.exec_runner`, or point the orchestrator's
runner_cmd at it. Sandboxing policy (rlimits, filesystem and network
containment) belongs to the parent orchestrator, not to this runner.
"""

import io
import json
import signal
import sys
import time
import traceback


class _WallClockExpired(BaseException):
    """Alarm signal; BaseException so program-level 'except Exception' passes it."""


def _swallowed_stdout():
    sink = io.StringIO()
    sink.write = lambda text: len(text)  # drop, but honor the contract
    return sink


def run(request: dict) -> dict:
    code = request["code"]
    timeout_ms = int(request.get("timeout_ms", 5000))

    def expire(signum, frame):
        raise _WallClockExpired()

    signal.signal(signal.SIGALRM, expire)
    signal.setitimer(signal.ITIMER_REAL, timeout_ms / 1000.0)

    keep_stdout = sys.stdout
    sys.stdout = _swallowed_stdout()
    namespace = {"__name__": "__main__"}
    status, answer, stderr_text = "Ok", None, ""
    began = time.monotonic()
    try:
        exec(compile(code, "<program>", "exec"), namespace)
    except _WallClockExpired:
        status = "Timeout"
    except BaseException:
        status = "ExecError"
        stderr_text = traceback.format_exc(limit=8)
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        sys.stdout = keep_stdout
    wall_ms = int((time.monotonic() - began) * 1000)

    if status == "Ok":
        if "answer" not in namespace:
            status = "ExecError"
            stderr_text = "program did not bind a variable named 'answer'"
        else:
            value = namespace["answer"]
            answer = repr(value) if isinstance(value, float) else str(value)
    return {"status": status, "answer": answer, "stderr": stderr_text[-2000:], "wall_ms": wall_ms}


def main() -> int:
    try:
        response = run(json.loads(sys.stdin.readline()))
    except BaseException:
        response = {
            "status": "ExecError",
            "answer": None,
            "stderr": traceback.format_exc(limit=4)[-2000:],
            "wall_ms": 0,
        }
    sys.stdout.write(json.dumps(response) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
