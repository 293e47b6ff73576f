"""Command-line entry points and the run-directory layout.

Commands: ``construct`` (task -> verified bundle on disk), ``run``
(bundle + input -> result and trace), ``replay`` (construct + run from
one transcript), and ``trace show``. Ablation flags disable individual
construction stages; every flag is snapshotted verbatim into config.json
inside the run directory so runs are auditable.

Exit codes: 0 success, 2 construction failure, 3 execution failure,
4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .backend import Backend, BackendError, LiveBackend, TranscriptError, load_transcript
from .codegen import AgentBundle, GenerationError, load_bundle, save_bundle
from .executor import ExecutionError, RecoveryBudgets, RunResult, TaskInputError, execute_swarm
from .grounding import GroundingReport, derive_directives, execute_directives
from .intent import IntentError, ParsedIntent, TaskDescription, analyze_prompt, degenerate_intent
from .plan import AgentSpec, FieldSchema, IoContract, PlanningError, SwarmPlan, plan_swarm
from .schema import StructuredOutputError, pretty_json, sha256_hex
from .trace import TraceLog, load_events
from .verify import ConstructionError, verify_construction

EXIT_OK = 0
EXIT_CONSTRUCTION = 2
EXIT_EXECUTION = 3
EXIT_CONFIG = 4

class ConfigError(Exception):
    """Bad invocation: unreadable files, missing transcript, malformed input."""


@dataclass
class RunConfig:
    task_file: str | None = None
    out_dir: str = "runs"
    run_dir: str | None = None
    mode: str = "replay"  # live | record | replay
    transcript: str | None = None
    no_intent_analysis: bool = False
    no_planning: bool = False
    no_grounding: bool = False
    no_verification: bool = False
    budgets: RecoveryBudgets = field(default_factory=RecoveryBudgets)
    serial: bool = True
    max_passes: int = 3

    def flags_dict(self) -> dict:
        return {
            "no_intent_analysis": self.no_intent_analysis,
            "no_planning": self.no_planning,
            "no_grounding": self.no_grounding,
            "no_verification": self.no_verification,
        }

    def to_dict(self) -> dict:
        return {
            "task_file": self.task_file,
            "out_dir": self.out_dir,
            "mode": self.mode,
            "transcript": self.transcript,
            "ablation_flags": self.flags_dict(),
            "budgets": {
                "local_retries": self.budgets.local_retries,
                "upstream_chains": self.budgets.upstream_chains,
                "structural_replans": self.budgets.structural_replans,
            },
            "serial": self.serial,
            "max_passes": self.max_passes,
        }


def make_backend(config: RunConfig, *, inner: Backend | None = None) -> Backend:
    if config.mode == "replay":
        if not config.transcript:
            raise ConfigError("replay mode requires --transcript")
        try:
            return load_transcript(config.transcript, "replay")
        except TranscriptError as exc:
            raise ConfigError(str(exc)) from exc
    if config.mode == "record":
        if not config.transcript:
            raise ConfigError("record mode requires --transcript")
        return load_transcript(config.transcript, "record", inner=inner)
    if config.mode == "live":
        return inner or LiveBackend()
    raise ConfigError(f"unknown backend mode {config.mode!r}")


def resolve_run_dir(config: RunConfig, task_text: str) -> Path:
    if config.run_dir:
        path = Path(config.run_dir)
    else:
        stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
        short = sha256_hex(task_text + config.mode)[:8]
        path = Path(config.out_dir) / f"{stamp}-{short}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def single_agent_plan(task_text: str) -> SwarmPlan:
    """Fallback when planning is disabled: one agent wrapping the raw task."""
    spec = AgentSpec(
        spec_id="task_agent",
        role="Complete the task exactly as described, in one step.",
        tools=[],
        dependencies=[],
        io_contract=IoContract(
            input_schema=[FieldSchema("task", "object", "the full task input")],
            output_schema=[FieldSchema("response", "text", "the final answer")],
            description=f"Single-agent fallback for: {task_text[:200]}",
        ),
    )
    return SwarmPlan(
        swarm_name="single-agent fallback",
        summary="Planning disabled; the raw task is handled by one agent.",
        coordination_strategy="single agent, no coordination",
        specs=[spec],
        dag_edges=[],
    )


# ---------------------------------------------------------------------------
# Pipeline orchestration (library level; the CLI handlers wrap these)
# ---------------------------------------------------------------------------


def construct_bundle(
    task_text: str,
    backend: Backend,
    config: RunConfig,
    trace: TraceLog,
) -> tuple[AgentBundle, ParsedIntent, SwarmPlan, GroundingReport]:
    task = TaskDescription(text=task_text)

    if config.no_intent_analysis:
        intent = degenerate_intent(task)
        trace.append("stage_skipped", stage="intent_analysis")
    else:
        grounding_enabled = not config.no_grounding
        intent = analyze_prompt(
            task, backend, grounding_enabled=grounding_enabled, trace=trace
        )
        trace.append(
            "intent_analysis",
            constraints=len(intent.constraints),
            task_examples=len(intent.task_examples),
        )

    if config.no_planning:
        plan = single_agent_plan(task_text)
        trace.append("stage_skipped", stage="planning")
    else:
        plan = plan_swarm(intent, backend)
        trace.append("plan", specs=len(plan.specs), edges=len(plan.dag_edges))

    if config.no_grounding:
        grounding = GroundingReport()
        trace.append("stage_skipped", stage="grounding")
    else:
        directives = derive_directives(plan)
        grounding = execute_directives(
            directives, backend, trace=trace, parallel=not config.serial
        )
        trace.append("grounding", directives=len(directives))

    bundle = verify_construction(
        plan,
        grounding,
        intent,
        backend,
        max_passes=config.max_passes,
        trace=trace,
        verification_enabled=not config.no_verification,
    )
    if config.no_verification:
        trace.append("stage_skipped", stage="verification")
    return bundle, bundle.intent, bundle.plan, bundle.grounding


def write_construction_artifacts(
    run_dir: Path,
    config: RunConfig,
    intent: ParsedIntent,
    plan: SwarmPlan,
    grounding: GroundingReport,
    bundle: AgentBundle,
    trace: TraceLog,
) -> None:
    (run_dir / "config.json").write_text(pretty_json(config.to_dict()), encoding="utf-8")
    (run_dir / "intent.json").write_text(pretty_json(intent.to_dict()), encoding="utf-8")
    (run_dir / "plan.json").write_text(pretty_json(plan.to_dict()), encoding="utf-8")
    (run_dir / "grounding.json").write_text(pretty_json(grounding.to_dict()), encoding="utf-8")
    save_bundle(bundle, run_dir / "bundle.json")
    trace.save(run_dir / "construction_trace.jsonl")


def run_bundle(
    bundle: AgentBundle,
    task_input: dict,
    backend: Backend,
    config: RunConfig,
    run_dir: Path,
) -> RunResult:
    trace = TraceLog()
    result = execute_swarm(
        bundle,
        task_input,
        config.budgets,
        backend,
        trace=trace,
        serial=config.serial,
        run_dir=run_dir,
    )
    (run_dir / "result.json").write_text(pretty_json(result.to_dict()), encoding="utf-8")
    trace.save(run_dir / "run_trace.jsonl")
    return result


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _read_task(config: RunConfig) -> str:
    if not config.task_file:
        raise ConfigError("a task file is required")
    path = Path(config.task_file)
    if not path.exists():
        raise ConfigError(f"task file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigError(f"task file is empty: {path}")
    return text


def _read_task_input(input_file: str) -> dict:
    path = Path(input_file)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"input file {path} does not parse: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"input file {path} must contain a JSON object")
    return data


CONSTRUCTION_FAILURES = (
    ConstructionError,
    GenerationError,
    PlanningError,
    IntentError,
    StructuredOutputError,
)


def _write_construction_failure(run_dir: Path, config: RunConfig, trace: TraceLog, exc) -> None:
    verdicts = [v.to_dict() for v in getattr(exc, "verdicts", [])]
    trace.append("construction_failure", message=str(exc), verdicts=verdicts)
    trace.save(run_dir / "construction_trace.jsonl")
    (run_dir / "config.json").write_text(pretty_json(config.to_dict()), encoding="utf-8")
    (run_dir / "failure.json").write_text(
        pretty_json({"error": str(exc), "verdicts": verdicts}), encoding="utf-8"
    )


def cmd_construct(config: RunConfig, *, backend: Backend | None = None) -> int:
    task_text = _read_task(config)
    run_dir = resolve_run_dir(config, task_text)
    backend = backend or make_backend(config)
    trace = TraceLog()
    try:
        bundle, intent, plan, grounding = construct_bundle(task_text, backend, config, trace)
    except CONSTRUCTION_FAILURES as exc:
        _write_construction_failure(run_dir, config, trace, exc)
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    write_construction_artifacts(run_dir, config, intent, plan, grounding, bundle, trace)
    print(f"bundle written to {run_dir / 'bundle.json'}")
    return EXIT_OK


def cmd_run(config: RunConfig, bundle_path: str, input_file: str,
            *, backend: Backend | None = None) -> int:
    try:
        bundle = load_bundle(bundle_path)
    except Exception as exc:
        raise ConfigError(f"cannot load bundle: {exc}") from exc
    task_input = _read_task_input(input_file)
    run_dir = resolve_run_dir(config, bundle.content_hash)
    backend = backend or make_backend(config)
    try:
        result = run_bundle(bundle, task_input, backend, config, run_dir)
    except TaskInputError as exc:
        raise ConfigError(str(exc)) from exc
    except ExecutionError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    if not result.success:
        print("run failed: recovery budget exhausted (see run_trace.jsonl)", file=sys.stderr)
        return EXIT_EXECUTION
    print(f"result written to {run_dir / 'result.json'}")
    return EXIT_OK


def cmd_replay(config: RunConfig, input_file: str, *, backend: Backend | None = None) -> int:
    """Construct and run from a single transcript, in one run directory."""
    task_text = _read_task(config)
    task_input = _read_task_input(input_file)
    run_dir = resolve_run_dir(config, task_text)
    backend = backend or make_backend(config)
    trace = TraceLog()
    try:
        bundle, intent, plan, grounding = construct_bundle(task_text, backend, config, trace)
    except CONSTRUCTION_FAILURES as exc:
        _write_construction_failure(run_dir, config, trace, exc)
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    write_construction_artifacts(run_dir, config, intent, plan, grounding, bundle, trace)
    try:
        result = run_bundle(bundle, task_input, backend, config, run_dir)
    except TaskInputError as exc:
        raise ConfigError(str(exc)) from exc
    except ExecutionError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    if not result.success:
        print("run failed: recovery budget exhausted", file=sys.stderr)
        return EXIT_EXECUTION
    print(f"replay complete; artifacts in {run_dir}")
    return EXIT_OK


def cmd_trace_show(path: str) -> int:
    trace_path = Path(path)
    if not trace_path.exists():
        raise ConfigError(f"trace file not found: {trace_path}")
    for event in load_events(trace_path):
        detail = " ".join(f"{k}={json.dumps(v)}" for k, v in sorted(event.data.items()))
        print(f"[{event.seq:4d}] {event.kind:<20} {detail}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=("live", "record", "replay"), default="replay")
    parser.add_argument("--transcript", help="transcript file for record/replay modes")
    parser.add_argument("--out", dest="out_dir", default="runs", help="runs directory")
    parser.add_argument("--run-dir", dest="run_dir", help="exact run directory (overrides --out)")
    parser.add_argument("--concurrent", action="store_true", help="dispatch ready nodes concurrently")
    parser.add_argument("--max-passes", type=int, default=3)
    parser.add_argument("--local-retries", type=int, default=2)
    parser.add_argument("--upstream-chains", type=int, default=1)
    parser.add_argument("--structural-replans", type=int, default=1)


def _add_ablations(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-intent-analysis", action="store_true")
    parser.add_argument("--no-planning", action="store_true",
                        help="single-agent fallback plan")
    parser.add_argument("--no-grounding", action="store_true")
    parser.add_argument("--no-verification", action="store_true")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        task_file=getattr(args, "task", None),
        out_dir=args.out_dir,
        run_dir=args.run_dir,
        mode=args.mode,
        transcript=args.transcript,
        no_intent_analysis=getattr(args, "no_intent_analysis", False),
        no_planning=getattr(args, "no_planning", False),
        no_grounding=getattr(args, "no_grounding", False),
        no_verification=getattr(args, "no_verification", False),
        budgets=RecoveryBudgets(
            local_retries=args.local_retries,
            upstream_chains=args.upstream_chains,
            structural_replans=args.structural_replans,
        ),
        serial=not args.concurrent,
        max_passes=args.max_passes,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmforge",
        description="Construct verified agent swarms from task descriptions and execute them.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_construct = sub.add_parser("construct", help="compile a task into a verified bundle")
    p_construct.add_argument("--task", required=True, help="task description file")
    _add_common(p_construct)
    _add_ablations(p_construct)

    p_run = sub.add_parser("run", help="execute a bundle on an input")
    p_run.add_argument("--bundle", required=True)
    p_run.add_argument("--input", required=True, help="JSON object with the task input fields")
    _add_common(p_run)

    p_replay = sub.add_parser("replay", help="construct + run from one transcript")
    p_replay.add_argument("--task", required=True)
    p_replay.add_argument("--input", required=True)
    _add_common(p_replay)
    _add_ablations(p_replay)

    p_trace = sub.add_parser("trace", help="inspect trace files")
    trace_sub = p_trace.add_subparsers(dest="trace_command", required=True)
    p_show = trace_sub.add_parser("show", help="pretty-print a trace file")
    p_show.add_argument("file")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "construct":
            return cmd_construct(_config_from_args(args))
        if args.command == "run":
            return cmd_run(_config_from_args(args), args.bundle, args.input)
        if args.command == "replay":
            return cmd_replay(_config_from_args(args), args.input)
        if args.command == "trace":
            return cmd_trace_show(args.file)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
