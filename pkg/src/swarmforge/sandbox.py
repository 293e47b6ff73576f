"""Isolated execution of generated code against unit tests.

Each job runs in a fresh temporary directory in a child process with a
whitelisted environment (no inherited secrets) and a wall-clock timeout.
Network isolation is best-effort: a sitecustomize shim disables socket
creation inside the child, and the result records whether the shim was
applied.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

DEFAULT_TIMEOUT = 10.0
DEFAULT_WORKERS = 4

_SOCKET_SHIM = """\
import socket

def _blocked(*args, **kwargs):
    raise OSError("network access is disabled in the sandbox")

socket.socket = _blocked
socket.create_connection = _blocked
socket.getaddrinfo = _blocked
"""

_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_+-]*)\n(.*?)```", re.DOTALL)


class SandboxConfigError(Exception):
    """The sandbox cannot run (e.g. the interpreter is missing)."""


@dataclass(frozen=True)
class SandboxJob:
    code: str
    test_code: str
    timeout: float = DEFAULT_TIMEOUT
    interpreter: str = sys.executable

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class SandboxResult:
    passed: bool
    stdout: str
    stderr: str
    duration: float
    timed_out: bool
    network_shim_applied: bool = True


def extract_code_block(text: str) -> str:
    """Return the contents of the first fenced code block, or the text itself."""
    match = _FENCE_RE.search(text)
    if match:
        return match.group(1)
    return text


def run_code_tests(job: SandboxJob) -> SandboxResult:
    """Run code plus test code as one script in a sandboxed subprocess.

    A timeout is reported in the result, not raised; a missing
    interpreter is a configuration error.
    """
    interpreter = shutil.which(job.interpreter) or (
        job.interpreter if os.path.exists(job.interpreter) else None
    )
    if interpreter is None:
        raise SandboxConfigError(f"interpreter not found: {job.interpreter}")

    workdir = tempfile.mkdtemp(prefix="swarmforge-sandbox-")
    try:
        script = os.path.join(workdir, "main.py")
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(extract_code_block(job.code))
            fh.write("\n\n")
            fh.write(extract_code_block(job.test_code))
            fh.write("\n")
        with open(os.path.join(workdir, "sitecustomize.py"), "w", encoding="utf-8") as fh:
            fh.write(_SOCKET_SHIM)

        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "LANG": os.environ.get("LANG", "C.UTF-8"),
            "HOME": workdir,
            "PYTHONPATH": workdir,
            "PYTHONDONTWRITEBYTECODE": "1",
        }

        start = time.monotonic()
        try:
            proc = subprocess.run(
                [interpreter, script],
                cwd=workdir,
                env=env,
                capture_output=True,
                text=True,
                timeout=job.timeout,
            )
            duration = time.monotonic() - start
            return SandboxResult(
                passed=proc.returncode == 0,
                stdout=proc.stdout,
                stderr=proc.stderr,
                duration=duration,
                timed_out=False,
            )
        except subprocess.TimeoutExpired as exc:
            duration = time.monotonic() - start
            return SandboxResult(
                passed=False,
                stdout=_decode(exc.stdout),
                stderr=_decode(exc.stderr),
                duration=duration,
                timed_out=True,
            )
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _decode(data) -> str:
    if data is None:
        return ""
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return str(data)


def run_jobs(jobs: list[SandboxJob], max_workers: int = DEFAULT_WORKERS) -> list[SandboxResult]:
    """Run independent jobs on a bounded worker pool, preserving order."""
    if not jobs:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run_code_tests, jobs))
