import sys

import pytest

from swarmforge.sandbox import (
    SandboxConfigError,
    SandboxJob,
    extract_code_block,
    run_code_tests,
    run_jobs,
)

CORRECT_IMPL = """\
from typing import List


def has_close_elements(numbers: List[float], threshold: float) -> bool:
    for idx, elem in enumerate(numbers):
        for idx2, elem2 in enumerate(numbers):
            if idx != idx2:
                if abs(elem - elem2) < threshold:
                    return True
    return False
"""

# Off-by-one variant: uses <= instead of the strict comparison.
SLOPPY_IMPL = CORRECT_IMPL.replace("< threshold", "<= threshold")

DOCTEST_ASSERTIONS = """\
assert has_close_elements([1.0, 2.0, 3.0], 0.5) == False
assert has_close_elements([1.0, 2.8, 3.0, 4.0, 5.0, 2.0], 0.3) == True
"""

# Oracle for the strict-inequality boundary: |1.5 - 1.0| == 0.5 exactly,
# so a strict comparison must answer False.
BOUNDARY_TEST = "assert has_close_elements([1.0, 1.5], 0.5) == False\n"


def test_doctest_cases_pass_for_correct_implementation():
    result = run_code_tests(SandboxJob(code=CORRECT_IMPL, test_code=DOCTEST_ASSERTIONS))
    assert result.passed
    assert not result.timed_out
    assert result.stderr == ""


def test_boundary_case_separates_strict_from_sloppy():
    strict = run_code_tests(SandboxJob(code=CORRECT_IMPL, test_code=BOUNDARY_TEST))
    sloppy = run_code_tests(SandboxJob(code=SLOPPY_IMPL, test_code=BOUNDARY_TEST))
    assert strict.passed
    assert not sloppy.passed
    assert "AssertionError" in sloppy.stderr


def test_infinite_loop_times_out():
    result = run_code_tests(
        SandboxJob(code="while True: pass", test_code="", timeout=1.0)
    )
    assert result.timed_out
    assert not result.passed
    assert result.duration <= 1.0 + 1.0  # timeout plus one second of grace


def test_duration_within_grace_for_normal_jobs():
    result = run_code_tests(SandboxJob(code="x = 1", test_code="assert x == 1", timeout=10))
    assert result.passed
    assert result.duration <= 10 + 1


def test_timeout_must_be_positive():
    with pytest.raises(ValueError):
        SandboxJob(code="", test_code="", timeout=0)


def test_missing_interpreter_is_config_error():
    with pytest.raises(SandboxConfigError):
        run_code_tests(SandboxJob(code="x=1", test_code="", interpreter="/no/such/python"))


def test_jobs_run_in_isolated_directories():
    write_marker = "open('marker.txt', 'w').write('here')\n"
    read_marker = (
        "import os\n"
        "assert not os.path.exists('marker.txt'), 'leaked state between jobs'\n"
    )
    first = run_code_tests(SandboxJob(code=write_marker, test_code=""))
    second = run_code_tests(SandboxJob(code=read_marker, test_code=""))
    assert first.passed and second.passed


def test_environment_is_whitelisted():
    probe = (
        "import os\n"
        "secretish = [k for k in os.environ if 'KEY' in k or 'TOKEN' in k or 'SECRET' in k]\n"
        "assert secretish == [], secretish\n"
    )
    result = run_code_tests(SandboxJob(code=probe, test_code=""))
    assert result.passed, result.stderr


def test_network_shim_blocks_sockets():
    probe = (
        "import socket\n"
        "try:\n"
        "    socket.socket()\n"
        "except OSError:\n"
        "    pass\n"
        "else:\n"
        "    raise SystemExit('socket creation should have been blocked')\n"
    )
    result = run_code_tests(SandboxJob(code=probe, test_code=""))
    assert result.passed, result.stdout + result.stderr
    assert result.network_shim_applied


def test_fenced_code_is_extracted_before_running():
    fenced = "```python\nvalue = 41 + 1\n```"
    result = run_code_tests(SandboxJob(code=fenced, test_code="assert value == 42"))
    assert result.passed
    assert extract_code_block(fenced) == "value = 41 + 1\n"
    assert extract_code_block("plain") == "plain"


def test_stdout_and_stderr_captured():
    result = run_code_tests(
        SandboxJob(code="print('to out')\nimport sys\nprint('to err', file=sys.stderr)",
                   test_code="")
    )
    assert "to out" in result.stdout
    assert "to err" in result.stderr


def test_worker_pool_preserves_order_and_runs_all():
    jobs = [
        SandboxJob(code=f"x = {i}", test_code=f"assert x == {i}") for i in range(6)
    ]
    jobs.append(SandboxJob(code="raise ValueError('boom')", test_code=""))
    results = run_jobs(jobs, max_workers=4)
    assert len(results) == 7
    assert all(r.passed for r in results[:6])
    assert not results[6].passed
    assert run_jobs([]) == []


def test_interpreter_default_is_current_python():
    assert SandboxJob(code="", test_code="x", timeout=1).interpreter == sys.executable
