#!/usr/bin/env python3
"""Replay every shipped demo and print the headline facts from each run.

Run from the repo root:  python3 scripts/run_demos.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from swarmforge import cli

DEMOS = REPO / "demos"


def replay(name: str, out_root: Path) -> dict:
    demo = DEMOS / name
    run_dir = out_root / name
    code = cli.main(
        [
            "replay",
            "--task", str(demo / "task.txt"),
            "--input", str(demo / "input.json"),
            "--transcript", str(demo / "transcript.json"),
            "--mode", "replay",
            "--run-dir", str(run_dir),
        ]
    )
    if code != 0:
        raise SystemExit(f"replay of {name} exited with {code}")
    return {
        "plan": json.loads((run_dir / "plan.json").read_text()),
        "result": json.loads((run_dir / "result.json").read_text()),
    }


def main() -> int:
    out_root = Path(tempfile.mkdtemp(prefix="swarmforge-demos-"))

    fc = replay("function_completion", out_root)
    verdict = fc["result"]["outputs"]["code_verifier"]["verdict"]
    print(
        f"function_completion: {len(fc['plan']['specs'])} specs, "
        f"{len(fc['plan']['dag_edges'])} edges, code verifier verdict {verdict}"
    )

    cm = replay("competition_math", out_root)
    print(
        "competition_math: boxed answer "
        + cm["result"]["final_outputs"]["answer_formatter"]["boxed_answer"]
    )

    rc = replay("reading_comprehension", out_root)
    print(
        "reading_comprehension: final answer "
        + rc["result"]["final_outputs"]["answer_formatter"]["formatted_answer"]
    )

    print(f"\nrun artifacts under {out_root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
