#!/usr/bin/env python3
"""Record the shipped demo transcripts.

Each demo is a rule-driven stub standing in for the live model/search
providers; the real pipeline runs against it in record mode, producing a
transcript that later replays byte-for-byte with no network. The
function-completion demo also records every ablation variant into the
same transcript so the flags can be exercised offline.

Run from the repo root:  python3 scripts/build_demo_transcripts.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from swarmforge import cli
from swarmforge.backend import (
    Backend,
    ModelRequest,
    ModelResponse,
    RecordingBackend,
    SearchResult,
)
from swarmforge.codegen import CODEGEN_SYSTEM_PROMPT
from swarmforge.contracts import JUDGE_SYSTEM_PROMPT
from swarmforge.executor import ATTRIBUTION_SYSTEM_PROMPT, RecoveryBudgets, execute_swarm
from swarmforge.grounding import SUMMARY_SYSTEM_PROMPT
from swarmforge.intent import INTENT_SYSTEM_PROMPT
from swarmforge.plan import PLAN_SYSTEM_PROMPT
from swarmforge.schema import extract_structured, fenced_json
from swarmforge.trace import TraceLog
from swarmforge.verify import VERIFIER_SYSTEM_PROMPT

DEMOS_DIR = REPO / "demos"


# ---------------------------------------------------------------------------
# Stub backend
# ---------------------------------------------------------------------------


class RuleBackend(Backend):
    """Deterministic fake provider driven by one demo definition."""

    def __init__(self, demo: "Demo"):
        self.demo = demo

    def complete(self, request: ModelRequest) -> ModelResponse:
        system = request.system_prompt

        if system == INTENT_SYSTEM_PROMPT:
            reply = self.demo.intent_payload
        elif system == PLAN_SYSTEM_PROMPT:
            reply = self.demo.plan_payload
        elif system == SUMMARY_SYSTEM_PROMPT:
            payload = self._payload(request)
            spec_id = payload["directive"]["spec_id"]
            reply = self.demo.grounding_reply(spec_id)
        elif system == CODEGEN_SYSTEM_PROMPT:
            payload = self._payload(request)
            reply = self.demo.codegen_reply(
                payload["spec"], int(payload.get("generation", 1))
            )
        elif system == VERIFIER_SYSTEM_PROMPT:
            payload = self._payload(request)
            reply = self.demo.verifier_reply(
                payload["spec"]["spec_id"], int(payload["agent"].get("generation", 1))
            )
        elif system == JUDGE_SYSTEM_PROMPT:
            payload = self._payload(request)
            reply = [
                {"assertion": a, "passed": True, "rationale": "satisfied"}
                for a in payload.get("assertions", [])
            ]
        elif system == ATTRIBUTION_SYSTEM_PROMPT:
            raise AssertionError("demo pipelines must not need error attribution")
        elif system.startswith("# Agent: "):
            spec_id = system.splitlines()[0][len("# Agent: "):].strip()
            reply = self.demo.run_output(spec_id)
        else:
            raise AssertionError(f"no rule for system prompt: {system[:80]!r}")
        return ModelResponse(text=fenced_json(reply), token_usage=(64, 64))

    def search(self, query: str, max_results: int) -> list[SearchResult]:
        hits = self.demo.search_results(query)
        return [SearchResult.from_dict(h) for h in hits[:max_results]]

    @staticmethod
    def _payload(request: ModelRequest) -> dict:
        return extract_structured(request.messages[0].content)


# ---------------------------------------------------------------------------
# Shared canned-content helpers
# ---------------------------------------------------------------------------


def field_entry(name: str, kind: str, description: str = "") -> dict:
    return {"name": name, "kind": kind, "description": description}


def agent_prompt(spec: dict, summary: str, extra: str = "") -> str:
    """Deterministic agent system prompt embedding the full contract."""
    contract = spec["io_contract"]
    criteria = spec["verification_criteria"]
    lines = [
        f"# Agent: {spec['spec_id']}",
        "",
        f"Role: {spec['role']}",
        "",
        "Input fields:",
    ]
    for f in contract.get("input_schema", []):
        lines.append(f"- {f['name']} ({f['kind']}): {f.get('description', '')}")
    lines.append("")
    lines.append("Output fields (reply with one fenced JSON object containing exactly these):")
    for f in contract.get("output_schema", []):
        lines.append(f"- {f['name']} ({f['kind']}): {f.get('description', '')}")
    if criteria.get("behavioral_assertions"):
        lines.append("")
        lines.append("Behavioral assertions:")
        for a in criteria["behavioral_assertions"]:
            lines.append(f"- {a}")
    if criteria.get("forbidden_patterns"):
        lines.append("")
        lines.append("Forbidden:")
        for p in criteria["forbidden_patterns"]:
            lines.append(f"- {p['text']}")
    if summary:
        lines.append("")
        lines.append(f"Research notes: {summary}")
    if extra:
        lines.append("")
        lines.append(extra)
    return "\n".join(lines)


class Demo:
    """One demo definition: task, canned stage payloads, and execution outputs."""

    name: str
    task_text: str
    task_input: dict
    intent_payload: dict
    plan_payload: dict
    category_hits: dict[str, list[dict]]
    directive_hits: dict[str, list[dict]]
    summaries: dict[str, str]
    recommendations: dict[str, list[dict]]
    run_outputs: dict[str, dict]
    codegen_extras: dict[tuple[str, int], str] = {}
    rejections: dict[tuple[str, int], list[str]] = {}

    def search_results(self, query: str) -> list[dict]:
        for key, hits in self.category_hits.items():
            if key in query:
                return hits
        for spec_id, hits in self.directive_hits.items():
            spec = self._spec(spec_id)
            if spec["role"] in query:
                return hits
        return [
            {
                "title": "General reference",
                "url": "https://example.org/reference",
                "snippet": f"Background material for: {query[:80]}",
            }
        ]

    def _spec(self, spec_id: str) -> dict:
        for spec in self.plan_payload["specs"]:
            if spec["spec_id"] == spec_id:
                return spec
        raise KeyError(spec_id)

    def grounding_reply(self, spec_id: str) -> dict:
        return {
            "research_summary": self.summaries.get(spec_id, ""),
            "recommendations": self.recommendations.get(spec_id, []),
        }

    def codegen_reply(self, spec: dict, generation: int) -> dict:
        if spec["spec_id"] == "task_agent":
            prompt = agent_prompt(spec, "", "Planning is disabled; handle the task alone.")
        else:
            extra = self.codegen_extras.get((spec["spec_id"], generation), "")
            prompt = agent_prompt(spec, self.summaries.get(spec["spec_id"], ""), extra)
        return {
            "system_prompt": prompt,
            "tool_bindings": spec.get("tools", []),
            "output_parser_hint": "Extract the first fenced JSON object from the reply.",
        }

    def verifier_reply(self, spec_id: str, generation: int) -> dict:
        issues = self.rejections.get((spec_id, generation))
        if issues:
            return {"approved": False, "failure_type": "spec_adherence", "issues": issues}
        return {"approved": True, "issues": []}

    def run_output(self, spec_id: str) -> dict:
        if spec_id == "task_agent":
            return {"response": self.single_agent_response()}
        return self.run_outputs[spec_id]

    def single_agent_response(self) -> str:
        return "Task handled in a single step."


# ---------------------------------------------------------------------------
# Demo 1: Python function completion
# ---------------------------------------------------------------------------

FUNCTION_TASK = """\
Expert Python coding agent for function completion. Given a
Python function signature with a docstring, complete the
implementation. Reply with the full function definition
(including the signature and docstring) inside a single python
code block. Do not include example usage, tests, or explanatory
prose. Focus on correctness, handling edge cases, and matching
the docstring specification exactly.
"""

HAS_CLOSE_SIGNATURE = (
    "def has_close_elements(numbers: List[float], threshold: float) -> bool:"
)
HAS_CLOSE_DOCSTRING = (
    '""" Check if in given list of numbers, are any two numbers closer to each '
    'other than given threshold.\n'
    "    >>> has_close_elements([1.0, 2.0, 3.0], 0.5)\n"
    "    False\n"
    "    >>> has_close_elements([1.0, 2.8, 3.0, 4.0, 5.0, 2.0], 0.3)\n"
    "    True\n"
    '    """'
)
HAS_CLOSE_CODE = f"""\
```python
from typing import List


{HAS_CLOSE_SIGNATURE}
    {HAS_CLOSE_DOCSTRING}
    for idx, elem in enumerate(numbers):
        for idx2, elem2 in enumerate(numbers):
            if idx != idx2:
                if abs(elem - elem2) < threshold:
                    return True
    return False
```"""


class FunctionCompletionDemo(Demo):
    name = "function_completion"
    task_text = FUNCTION_TASK
    task_input = {
        "raw_signature": HAS_CLOSE_SIGNATURE,
        "raw_docstring": HAS_CLOSE_DOCSTRING,
    }

    intent_payload = {
        "goal": (
            "Complete Python function implementations given only a signature and "
            "docstring, exactly matching the specification and handling all edge cases"
        ),
        "domain": "competitive programming / code generation",
        "tone": "precise, concise, code-only",
        "entities": ["Python", "function signature", "docstring", "edge cases", "code block"],
        "constraints": [
            "Reply with only a single Python code block",
            "Do not include example usage, tests, or prose",
            "Match the docstring specification exactly",
            "Handle all edge cases (empty inputs, negatives, boundary values)",
            "Prioritize correctness over cleverness",
            "Do not import non-standard libraries",
        ],
        "task_categories": [
            "straightforward list manipulation",
            "medium algorithmic logic",
            "string encoding",
            "number theory",
            "edge-case-heavy",
            "recursive",
            "adversarial",
        ],
    }

    category_hits = {
        "straightforward list manipulation": [
            {
                "title": "Function-completion benchmark: list manipulation",
                "url": "https://evalscope.readthedocs.io/en/latest/benchmarks/humaneval.html",
                "snippet": "def has_close_elements(numbers: List[float], threshold: float) -> bool: ...",
            }
        ],
        "medium algorithmic logic": [
            {
                "title": "Hand-written function completion problems",
                "url": "https://github.com/openai/human-eval/",
                "snippet": "def sort_third(l: List[int]) -> List[int]: ...",
            }
        ],
        "string encoding": [
            {
                "title": "String encoding exercises",
                "url": "https://github.com/openai/human-eval/blob/master/data/example_problem.jsonl",
                "snippet": "def encode_cyclic(s: str) -> str: ...",
            }
        ],
        "number theory": [
            {
                "title": "Number theory completion problems",
                "url": "https://projecteuler.net/archives",
                "snippet": "def largest_prime_factor(n: int) -> int: ...",
            }
        ],
        "edge-case-heavy": [
            {
                "title": "Edge-case heavy interview questions",
                "url": "https://leetcode.com/problemset/",
                "snippet": "def median(l: list) -> float: ...",
            }
        ],
        "recursive": [
            {
                "title": "Recursive function katas",
                "url": "https://www.codewars.com/collections/recursion",
                "snippet": "def fib4(n: int) -> int: ...",
            }
        ],
        "adversarial": [
            {
                "title": "Adversarial specification puzzles",
                "url": "https://arxiv.org/abs/2107.03374",
                "snippet": "def decode_shift(s: str) -> str: ...",
            }
        ],
    }

    plan_payload = {
        "swarm_name": "Python Function Implementation Swarm",
        "summary": (
            "Four specialist agents operate in a pipeline: a Spec Analyst parses the "
            "docstring into an unambiguous specification, a Strategy Planner selects "
            "the optimal algorithm, a Code Synthesizer writes the implementation, and "
            "a Code Verifier audits for correctness and edge-case safety."
        ),
        "coordination_strategy": (
            "Strict topological order: spec_analyst, then strategy_planner, then "
            "code_synthesizer, then code_verifier auditing all upstream artifacts."
        ),
        "specs": [
            {
                "spec_id": "spec_analyst",
                "role": "Parses and structures the function signature and docstring into an unambiguous specification",
                "tools": ["web_search"],
                "dependencies": [],
                "io_contract": {
                    "description": "Transforms raw signature+docstring into a fully structured, unambiguous specification",
                    "input_schema": [
                        field_entry("raw_signature", "text", "exact function def line"),
                        field_entry("raw_docstring", "text", "verbatim docstring"),
                    ],
                    "output_schema": [
                        field_entry("function_name", "text"),
                        field_entry("parameters", "list", "[{name, type_hint, description}]"),
                        field_entry("return_type", "text"),
                        field_entry("behavioral_rules", "list", "explicit rules from the docstring"),
                        field_entry("edge_cases", "list", "[{case, expected_output, source}]"),
                        field_entry("resolved_ambiguities", "list", "resolved ambiguous cases with justification"),
                        field_entry("domain_category", "text"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Explicit edge cases in the docstring must appear verbatim in the edge_cases list with source='explicit'",
                        "Implicit edge cases (e.g., empty list for a list function) must be inferred with source='implied'",
                        "Ambiguous tie-breaking language must produce a resolved_ambiguities entry with a safe resolution",
                    ],
                    "required_tools": ["web_search"],
                    "forbidden_patterns": [
                        {"text": "Must not produce any Python code or pseudocode", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not omit any explicitly stated edge case", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "strategy_planner",
                "role": "Selects the optimal algorithmic strategy and data structures for the implementation",
                "tools": ["web_search"],
                "dependencies": ["spec_analyst"],
                "io_contract": {
                    "description": "Maps the structured spec to a concrete, complexity-aware algorithmic plan",
                    "input_schema": [
                        field_entry("function_name", "text"),
                        field_entry("parameters", "list"),
                        field_entry("return_type", "text"),
                        field_entry("edge_cases", "list"),
                        field_entry("domain_category", "text"),
                        field_entry("behavioral_rules", "list"),
                    ],
                    "output_schema": [
                        field_entry("chosen_algorithm", "text"),
                        field_entry("data_structures", "list"),
                        field_entry("stdlib_imports", "list"),
                        field_entry("complexity", "object", "{time, space}"),
                        field_entry("step_by_step_plan", "list"),
                        field_entry("edge_case_handling_plan", "list", "[{case, strategy}]"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Every edge case from spec_analyst must appear in edge_case_handling_plan with a non-empty strategy",
                        "If domain_category='dynamic_programming', the plan must include memoization or tabulation steps",
                        "Chosen algorithm must respect any stated complexity constraints",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not produce any Python code snippets", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not recommend an algorithm violating a complexity constraint", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "code_synthesizer",
                "role": "Writes the complete, correct Python function implementation from the algorithmic plan",
                "tools": ["web_search"],
                "dependencies": ["spec_analyst", "strategy_planner"],
                "io_contract": {
                    "description": "Produces the final Python function as a single code block, faithful to spec and strategy",
                    "input_schema": [
                        field_entry("raw_signature", "text", "original signature verbatim"),
                        field_entry("raw_docstring", "text", "original docstring verbatim"),
                        field_entry("spec_document", "text", "full structured spec from the analyst"),
                        field_entry("step_by_step_plan", "list"),
                        field_entry("edge_case_handling_plan", "list"),
                        field_entry("stdlib_imports", "list"),
                    ],
                    "output_schema": [
                        field_entry("python_code_block", "text", "single fenced code block containing imports + complete function definition"),
                        field_entry("synthesizer_notes", "text"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "The output code block must begin with the exact raw_signature, character-for-character",
                        "The docstring inside the code must match raw_docstring verbatim",
                        "Every edge case in edge_case_handling_plan must be traceable to a guard clause or branch",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not include prose or markdown outside the single fenced code block", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not include example usage, test calls, or print statements outside the function body", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "code_verifier",
                "role": "Audits the synthesized implementation for correctness, spec compliance, and edge-case safety",
                "tools": ["web_search", "file_generator"],
                "dependencies": ["spec_analyst", "strategy_planner", "code_synthesizer"],
                "io_contract": {
                    "description": "Validates implementation against spec and strategy; approves or issues revision requests",
                    "input_schema": [
                        field_entry("python_code_block", "text"),
                        field_entry("spec_document", "text", "full structured spec from the analyst"),
                        field_entry("behavioral_rules", "list"),
                        field_entry("edge_cases", "list"),
                        field_entry("strategy_document", "text", "full strategy from the planner"),
                        field_entry("synthesizer_notes", "text"),
                    ],
                    "output_schema": [
                        field_entry("verdict", "text", "'PASS' or 'FAIL'"),
                        field_entry("audit_report", "text"),
                        field_entry("revision_request", "list", "if FAIL, [{issue, fix, severity}]"),
                        field_entry("verified_code_block", "text", "the approved code block"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "If the signature differs from raw_signature by even one character, verdict must be 'FAIL'",
                        "If a guard for an explicit edge case is missing, verdict must be 'FAIL'",
                        "If the code imports a third-party library, verdict must be 'FAIL'",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not alter any line of the python_code_block", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not emit verdict='PASS' if any behavioral rule or explicit edge case is unhandled", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
        ],
        "dag_edges": [
            {"from_spec": "spec_analyst", "to_spec": "strategy_planner"},
            {"from_spec": "spec_analyst", "to_spec": "code_synthesizer"},
            {"from_spec": "spec_analyst", "to_spec": "code_verifier"},
            {"from_spec": "strategy_planner", "to_spec": "code_synthesizer"},
            {"from_spec": "strategy_planner", "to_spec": "code_verifier"},
            {"from_spec": "code_synthesizer", "to_spec": "code_verifier"},
        ],
    }

    directive_hits = {
        "spec_analyst": [
            {
                "title": "Docstring ambiguity patterns",
                "url": "https://peps.python.org/pep-0257/",
                "snippet": "Conventions for reading docstrings precisely.",
            }
        ],
        "strategy_planner": [
            {
                "title": "Algorithm selection heuristics",
                "url": "https://cp-algorithms.com/",
                "snippet": "Choosing algorithms by constraint size and category.",
            }
        ],
        "code_synthesizer": [
            {
                "title": "Idiomatic Python implementations",
                "url": "https://docs.python.org/3/library/",
                "snippet": "Standard library reference for implementation work.",
            }
        ],
        "code_verifier": [
            {
                "title": "Code review checklists",
                "url": "https://google.github.io/eng-practices/review/",
                "snippet": "Auditing code against specifications.",
            }
        ],
    }

    summaries = {
        "spec_analyst": (
            "web_search used to retrieve examples of docstring ambiguity patterns; "
            "resolve ambiguity conservatively and enumerate implied edge cases."
        ),
        "strategy_planner": (
            "Searched for algorithm selection heuristics for competitive programming; "
            "prefer the simplest algorithm satisfying the stated complexity bounds."
        ),
        "code_synthesizer": (
            "Standard-library-only implementations; guard every planned edge case "
            "explicitly and keep the signature and docstring verbatim."
        ),
        "code_verifier": (
            "Audit checklist research: verify signature, docstring, edge-case guards, "
            "and import policy before emitting a verdict."
        ),
    }

    recommendations = {
        "spec_analyst": [
            {
                "name": "OpenAI GPT-4o API (Code Generation)",
                "url": "https://platform.openai.com/docs/guides/text-generation",
                "description": "Flagship LLM backend for the code synthesis step.",
                "auth_method": "API key",
                "relevance_score": 1.0,
            },
            {
                "name": "Anthropic Claude API",
                "url": "https://platform.claude.com/docs/",
                "description": "Top-tier alternative for code synthesis with a long context window.",
                "auth_method": "API key",
                "relevance_score": 0.95,
            },
        ]
    }

    run_outputs = {
        "spec_analyst": {
            "function_name": "has_close_elements",
            "parameters": [
                {"name": "numbers", "type_hint": "List[float]", "description": "values to compare pairwise"},
                {"name": "threshold", "type_hint": "float", "description": "strict distance bound"},
            ],
            "return_type": "bool",
            "behavioral_rules": [
                "return True if any pair distance < threshold",
                "comparison is strict: distances equal to threshold do not count",
            ],
            "edge_cases": [
                {"case": "empty list", "expected_output": False, "source": "implied"},
                {"case": "single element", "expected_output": False, "source": "implied"},
                {"case": "threshold=0", "expected_output": False, "source": "implied"},
            ],
            "resolved_ambiguities": [
                {
                    "ambiguity": "closer than",
                    "resolution": "strict inequality |a-b| < threshold",
                    "justification": "docstring phrasing 'closer than' excludes equality",
                }
            ],
            "domain_category": "list_manipulation",
        },
        "strategy_planner": {
            "chosen_algorithm": "nested loop pairwise comparison",
            "data_structures": ["list"],
            "stdlib_imports": ["typing"],
            "complexity": {"time": "O(n^2)", "space": "O(1)"},
            "step_by_step_plan": [
                "1. Iterate over every index pair (i, j) with i != j",
                "2. Compare abs(numbers[i] - numbers[j]) against threshold with strict <",
                "3. Return True on the first pair under the threshold",
                "4. Return False after exhausting all pairs",
            ],
            "edge_case_handling_plan": [
                {"case": "empty list", "strategy": "loop body never runs; falls through to return False"},
                {"case": "single element", "strategy": "no valid pair exists; falls through to return False"},
                {"case": "threshold=0", "strategy": "strict < means no distance qualifies; returns False"},
            ],
        },
        "code_synthesizer": {
            "python_code_block": HAS_CLOSE_CODE,
            "synthesizer_notes": (
                "Nested enumerate keeps the comparison strict and covers the implied "
                "edge cases without extra guards."
            ),
        },
        "code_verifier": {
            "verdict": "PASS",
            "audit_report": (
                "signature matches raw_signature: PASS; docstring verbatim: PASS; "
                "edge case guards (empty list, single element fall through to False): PASS; "
                "no third-party imports: PASS"
            ),
            "revision_request": [],
            "verified_code_block": HAS_CLOSE_CODE,
        },
    }

    def single_agent_response(self) -> str:
        return HAS_CLOSE_CODE


# ---------------------------------------------------------------------------
# Demo 2: competition mathematics
# ---------------------------------------------------------------------------

MATH_TASK = """\
Expert competition mathematics solver. Given a math problem
from any area (algebra, number theory, counting and
probability, geometry, intermediate algebra, prealgebra, or
precalculus), solve it step by step with rigorous reasoning.
Put your final answer inside \\boxed{}. Be precise with LaTeX
notation -- fractions as \\frac{a}{b}, square roots as
\\sqrt{x}. One problem per session, pure reasoning, no
tool use.
"""

MATH_PROBLEM = (
    "If f(x) = \\frac{3x-2}{x-2}, what is the value of f(-2) + f(-1) + f(0)? "
    "Express your answer as a common fraction."
)


class CompetitionMathDemo(Demo):
    name = "competition_math"
    task_text = MATH_TASK
    task_input = {"raw_problem_text": MATH_PROBLEM}

    intent_payload = {
        "goal": (
            "Given a single competition mathematics problem from any standard "
            "subject area, solve it step by step with rigorous mathematical "
            "reasoning and present the final answer in a LaTeX \\boxed{} expression."
        ),
        "domain": "Competition Mathematics (AMC 8 / AMC 10 / AMC 12 / AIME)",
        "tone": "Precise, rigorous, educational -- clear step-by-step derivations with formal LaTeX notation",
        "entities": [
            "AMC 8", "AMC 10", "AMC 12", "AIME", "algebra", "number theory",
            "counting and probability", "geometry", "intermediate algebra",
            "prealgebra", "precalculus", "LaTeX", "\\boxed{}",
        ],
        "constraints": [
            "One problem per session",
            "Full step-by-step reasoning is required",
            "Final answer must be enclosed in \\boxed{}",
            "Use precise LaTeX: \\frac{a}{b}, \\sqrt{x}",
            "No external tools -- pure reasoning only",
            "Cover all seven subject areas",
        ],
        "task_categories": [
            "algebra",
            "number theory",
            "counting and probability",
            "geometry",
            "intermediate algebra",
            "prealgebra",
            "precalculus",
        ],
    }

    category_hits = {
        "counting and probability": [
            {
                "title": "Combinatorics drills",
                "url": "https://www.thinkacademy.ca/resources/combinatorics",
                "snippet": "Chess team arrangement: 2 boys at ends, 3 girls in middle. 2 x 3! = 12.",
            }
        ],
        "number theory": [
            {
                "title": "Number theory archive",
                "url": "https://artofproblemsolving.com/wiki/index.php/Number_theory",
                "snippet": "Polynomial remainder via CRT and modular arithmetic drills.",
            }
        ],
        "intermediate algebra": [
            {
                "title": "Intermediate algebra problems",
                "url": "https://artofproblemsolving.com/wiki/index.php/Intermediate_algebra",
                "snippet": "Polynomial manipulation and inequality chains.",
            }
        ],
        "prealgebra": [
            {
                "title": "Prealgebra ratio and percent drills",
                "url": "https://artofproblemsolving.com/wiki/index.php/Prealgebra",
                "snippet": "Simple ratio and percent problems with unit analysis.",
            }
        ],
        "precalculus": [
            {
                "title": "Precalculus trigonometry problems",
                "url": "https://artofproblemsolving.com/wiki/index.php/Precalculus",
                "snippet": "sin/cos identities and polar form manipulation.",
            }
        ],
        "geometry": [
            {
                "title": "Geometry area-ratio techniques",
                "url": "https://cheenta.com/geometry-mass-point/",
                "snippet": "Triangle with ratio AD:DC = 1:2, find area of sub-triangle via mass point.",
            }
        ],
        "algebra": [
            {
                "title": "Classic algebraic manipulation",
                "url": "https://artofproblemsolving.com/wiki/index.php/Algebra",
                "snippet": (
                    "If x + y = 4 and xy = 5, what is x^2 + y^2? Using (x+y)^2 = "
                    "x^2 + 2xy + y^2 gives 16 = x^2 + 10 + y^2, so x^2 + y^2 = 6. \\boxed{6}"
                ),
            }
        ],
    }

    plan_payload = {
        "swarm_name": "CompMath Solver Swarm",
        "summary": (
            "Given a competition mathematics problem, this swarm classifies by domain "
            "and difficulty, produces a rigorous step-by-step solution, verifies for "
            "logical correctness and LaTeX formatting, and formats the final answer "
            "in \\boxed{} notation."
        ),
        "coordination_strategy": (
            "Strict topological order: problem_classifier, then specialist_solver, "
            "then solution_verifier, then answer_formatter. If the verifier returns "
            "FAIL without a verified_answer, surface the failure rather than "
            "presenting an unverified answer."
        ),
        "specs": [
            {
                "spec_id": "problem_classifier",
                "role": "Classifies the competition problem by subject area and difficulty tier",
                "tools": ["web_search"],
                "dependencies": [],
                "io_contract": {
                    "description": "Accepts raw problem text; emits structured classification metadata and a normalized problem brief for downstream agents.",
                    "input_schema": [
                        field_entry("raw_problem_text", "text", "verbatim problem as provided by the user"),
                    ],
                    "output_schema": [
                        field_entry("subject_area", "text", "one of: algebra | number_theory | counting_and_probability | geometry | intermediate_algebra | prealgebra | precalculus"),
                        field_entry("difficulty_tier", "text", "one of: AMC_8 | AMC_10 | AMC_12 | AIME"),
                        field_entry("problem_brief", "text", "normalized restatement listing all givens, constraints, and target quantity"),
                        field_entry("key_concepts", "list", "up to 5 relevant concepts"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Given divisors/modular arithmetic, must classify as 'number_theory'",
                        "Given sin/cos identities, must classify as 'precalculus'",
                        "Given a simple ratio/percent problem, must classify as 'prealgebra', tier 'AMC_8'",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not output any numerical or symbolic answer", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not produce more than one subject_area label", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "specialist_solver",
                "role": "Produces a rigorous, fully worked step-by-step solution tailored to the classified subject area",
                "tools": [],
                "dependencies": ["problem_classifier"],
                "io_contract": {
                    "description": "Accepts classification metadata; emits a complete LaTeX solution with raw answer.",
                    "input_schema": [
                        field_entry("subject_area", "text"),
                        field_entry("difficulty_tier", "text"),
                        field_entry("problem_brief", "text"),
                        field_entry("key_concepts", "list"),
                    ],
                    "output_schema": [
                        field_entry("solution_steps", "text", "full step-by-step solution in LaTeX, each step numbered"),
                        field_entry("raw_answer", "text", "bare answer value before \\boxed{} wrapping"),
                        field_entry("strategy_summary", "text"),
                        field_entry("confidence", "text", "HIGH | MEDIUM | LOW"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Counting problems must enumerate cases or apply combinatorial formulas -- no 'by inspection'",
                        "Geometry problems must cite the relevant theorem before applying it",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not invoke web_search", "kind": "tool_call", "pattern": "web_search"},
                        {"text": "Must not invoke file_generator", "kind": "tool_call", "pattern": "file_generator"},
                        {"text": "Must not produce a bare numerical answer without accompanying step-by-step derivation", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "solution_verifier",
                "role": "Independently checks the solution for logical correctness, completeness, and LaTeX formatting",
                "tools": ["web_search"],
                "dependencies": ["problem_classifier", "specialist_solver"],
                "io_contract": {
                    "description": "Validates the solution via a logical audit of each derivation step, an answer check by substitution, and a LaTeX format audit.",
                    "input_schema": [
                        field_entry("problem_brief", "text"),
                        field_entry("solution_steps", "text"),
                        field_entry("raw_answer", "text"),
                        field_entry("strategy_summary", "text"),
                        field_entry("confidence", "text"),
                    ],
                    "output_schema": [
                        field_entry("verdict", "text", "PASS | FAIL | NEEDS_REVISION"),
                        field_entry("errors_found", "list"),
                        field_entry("verified_answer", "text", "confirmed correct answer (may differ from raw_answer)"),
                        field_entry("verification_notes", "text"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Plain-text '3/7' instead of \\frac{3}{7} must be flagged as a formatting violation with verdict NEEDS_REVISION",
                        "Logically correct solution with no formatting errors must receive verdict PASS",
                        "If the final answer fails substitution back into constraints, verdict must be FAIL with corrected verified_answer",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not produce its own full solution", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not emit PASS if any logical step is unjustified or a notation violation is present", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "answer_formatter",
                "role": "Assembles the final publication-ready solution with \\boxed{} answer",
                "tools": ["file_generator"],
                "dependencies": ["problem_classifier", "specialist_solver", "solution_verifier"],
                "io_contract": {
                    "description": "Assembles the formatted document using verified_answer (not raw_answer), applying corrections from errors_found when the verdict demands them.",
                    "input_schema": [
                        field_entry("subject_area", "text"),
                        field_entry("difficulty_tier", "text"),
                        field_entry("solution_steps", "text"),
                        field_entry("strategy_summary", "text"),
                        field_entry("verdict", "text"),
                        field_entry("errors_found", "list"),
                        field_entry("verified_answer", "text"),
                    ],
                    "output_schema": [
                        field_entry("final_document", "text", "complete Markdown + LaTeX document ending with the boxed answer"),
                        field_entry("boxed_answer", "text", "\\boxed{<answer>}"),
                        field_entry("document_file_path", "text", "optional file path"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "final_document must end with $$\\boxed{<verified_answer>}$$",
                        "boxed_answer must use verified_answer from solution_verifier, not raw_answer from the solver",
                        "Must include a header with subject_area and difficulty_tier",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not omit the \\boxed{} expression", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not use raw_answer if solution_verifier overrode it with a different verified_answer", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
        ],
        "dag_edges": [
            {"from_spec": "problem_classifier", "to_spec": "specialist_solver"},
            {"from_spec": "problem_classifier", "to_spec": "solution_verifier"},
            {"from_spec": "problem_classifier", "to_spec": "answer_formatter"},
            {"from_spec": "specialist_solver", "to_spec": "solution_verifier"},
            {"from_spec": "specialist_solver", "to_spec": "answer_formatter"},
            {"from_spec": "solution_verifier", "to_spec": "answer_formatter"},
        ],
    }

    directive_hits = {
        "problem_classifier": [
            {
                "title": "Competition problem taxonomies",
                "url": "https://artofproblemsolving.com/wiki/index.php/AMC_Problems_and_Solutions",
                "snippet": "Classification by subject area and difficulty tier.",
            }
        ],
        "specialist_solver": [
            {
                "title": "Solution technique compendium",
                "url": "https://artofproblemsolving.com/articles",
                "snippet": "Theorem references and LaTeX formatting conventions.",
            }
        ],
        "solution_verifier": [
            {
                "title": "Common solution errors",
                "url": "https://artofproblemsolving.com/community",
                "snippet": "Proof verification approaches and frequent mistakes.",
            }
        ],
        "answer_formatter": [
            {
                "title": "Boxed-answer formatting standards",
                "url": "https://www.overleaf.com/learn/latex/Mathematical_expressions",
                "snippet": "LaTeX \\boxed{} conventions for final answers.",
            }
        ],
    }

    summaries = {
        "problem_classifier": (
            "Searched for problem classification taxonomies and difficulty tier "
            "definitions; classify by dominant technique, never by surface keywords alone."
        ),
        "specialist_solver": (
            "Searched for competition math solution techniques, theorem references, "
            "and LaTeX formatting conventions; number every derivation step."
        ),
        "solution_verifier": (
            "Searched for mathematical proof verification approaches and common "
            "solution errors; substitute the final answer back into the constraints."
        ),
        "answer_formatter": (
            "Searched for LaTeX \\boxed{} formatting standards and publication "
            "conventions; the verified answer always wins over the raw answer."
        ),
    }

    recommendations = {
        "problem_classifier": [
            {
                "name": "Problem archive API",
                "url": "https://artofproblemsolving.com/wiki/",
                "description": "Reference corpus for classification calibration.",
                "auth_method": "none",
                "relevance_score": 0.8,
            }
        ]
    }

    # The classifier is rejected twice for role confusion before the clean
    # third generation is approved.
    codegen_extras = {
        ("problem_classifier", 1): (
            "Then solve the problem step by step, showing the full derivation "
            "before emitting the classification."
        ),
        ("problem_classifier", 2): (
            "Declare the server-side tool variant 'web_search_20250305' for lookups."
        ),
    }
    rejections = {
        ("problem_classifier", 1): [
            "The system prompt instructs the agent to solve problems step-by-step, "
            "but the architecture plan states the classifier must NOT attempt any "
            "solution steps.",
            "The agent is not a solver -- embedding solution instructions causes it "
            "to produce answers instead of classification metadata.",
        ],
        ("problem_classifier", 2): [
            "web_search tool definition uses a server-side format "
            "('web_search_20250305') which requires provider-specific handling.",
            "Tool object missing required field validation.",
        ],
    }

    run_outputs = {
        "problem_classifier": {
            "subject_area": "algebra",
            "difficulty_tier": "AMC_10",
            "key_concepts": ["rational functions", "function evaluation", "fraction arithmetic"],
            "problem_brief": (
                "Given f(x) = (3x-2)/(x-2), compute f(-2) + f(-1) + f(0) as a common fraction."
            ),
        },
        "specialist_solver": {
            "solution_steps": (
                "Step 1: Evaluate f(-2) = (3(-2)-2)/(-2-2) = (-8)/(-4) = 2. "
                "Step 2: Evaluate f(-1) = (3(-1)-2)/(-1-2) = (-5)/(-3) = 5/3. "
                "Step 3: Evaluate f(0) = (3(0)-2)/(0-2) = (-2)/(-2) = 1. "
                "Step 4: Sum = 2 + 5/3 + 1 = 6/3 + 5/3 + 3/3 = 14/3."
            ),
            "raw_answer": "\\frac{14}{3}",
            "strategy_summary": "Direct substitution into rational function, then fraction addition.",
            "confidence": "HIGH",
        },
        "solution_verifier": {
            "verdict": "PASS",
            "errors_found": [],
            "verified_answer": "\\frac{14}{3}",
            "verification_notes": (
                "Each substitution verified. Fraction addition confirmed: "
                "6/3 + 5/3 + 3/3 = 14/3. All notation uses \\frac{}{} correctly."
            ),
        },
        "answer_formatter": {
            "final_document": (
                "[Algebra | AMC 10]\n\nStep 1: f(-2) = 2.\nStep 2: f(-1) = 5/3.\n"
                "Step 3: f(0) = 1.\nStep 4: Sum = 14/3.\n\nStrategy: Direct "
                "substitution.\n\n$$\\boxed{\\frac{14}{3}}$$"
            ),
            "boxed_answer": "\\boxed{\\frac{14}{3}}",
            "document_file_path": "",
        },
    }


# ---------------------------------------------------------------------------
# Demo 3: reading comprehension with discrete reasoning
# ---------------------------------------------------------------------------

READING_TASK = """\
Expert reading comprehension and discrete reasoning agent.
Given a factual passage and a question, answer by performing
numerical reasoning over the text -- counting entities,
computing differences, sorting values, or extracting specific
spans. Read the passage carefully and reason step by step.
Your final answer should be a short phrase, number, or date.
Put your final answer on the last line after 'ANSWER: '.
Give only the answer, not a full sentence.
"""

READING_PASSAGE = (
    "Hoping to rebound from their loss to the Patriots, the Raiders stayed at "
    "home for a Week 16 duel with the Houston Texans. Oakland took the early "
    "lead when Chaz Schilens hauled in a 10-yard touchdown pass from JaMarcus "
    "Russell in the first quarter. The Texans responded with a 28-yard field "
    "goal by Kris Brown. In the second quarter, Oakland extended its lead with "
    "a Sebastian Janikowski 40-yard field goal."
)

FULL_SENTENCE_ANSWER_PATTERN = r"ANSWER:\s+\S+(?:\s+\S+){2,}[.!?]\s*$"


class ReadingComprehensionDemo(Demo):
    name = "reading_comprehension"
    task_text = READING_TASK
    task_input = {
        "passage": READING_PASSAGE,
        "question": "How many field goals were kicked?",
    }

    intent_payload = {
        "goal": (
            "Given a factual passage and a question, answer by performing numerical "
            "or discrete reasoning -- counting, arithmetic, sorting, or span "
            "extraction -- and return a short phrase, number, or date."
        ),
        "domain": "Natural Language Processing / Reading Comprehension",
        "tone": "precise, analytical, step-by-step",
        "entities": [
            "passage", "question", "numerical reasoning", "counting", "arithmetic",
            "span extraction", "sorting", "date comparison",
        ],
        "constraints": [
            "Answer must be a short phrase, number, or date",
            "Final answer on the last line after 'ANSWER: '",
            "Reason step by step before the final answer",
            "Read the passage carefully; no outside knowledge",
            "Perform discrete operations: counting, subtraction, addition, sorting, max/min, span extraction",
        ],
        "task_categories": [
            "arithmetic difference",
            "entity counting",
            "span extraction",
            "sorting / ranking",
            "date duration",
            "aggregation",
            "multi-hop",
            "negation",
        ],
    }

    category_hits = {
        "arithmetic difference": [
            {
                "title": "Discrete reasoning over paragraphs: arithmetic",
                "url": "https://ucinlp.github.io/drop/",
                "snippet": (
                    "Passage: 'Seahawks scored 14 points, Patriots scored 7.' "
                    "Q: 'How many more points did the Seahawks score?' ANSWER: 7"
                ),
            }
        ],
        "entity counting": [
            {
                "title": "Counting entities in passages",
                "url": "https://ucinlp.github.io/drop/explore.html",
                "snippet": (
                    "Passage: 'TDs by Brady, Gronkowski, and Edelman.' "
                    "Q: 'How many players threw TDs?' ANSWER: 3"
                ),
            }
        ],
        "span extraction": [
            {
                "title": "Span extraction questions",
                "url": "https://rajpurkar.github.io/SQuAD-explorer/",
                "snippet": (
                    "Passage: 'Battle of Hastings on 14 October 1066.' Q: 'When?' "
                    "ANSWER: 14 Oct 1066"
                ),
            }
        ],
        "sorting / ranking": [
            {
                "title": "Ranked comparisons in text",
                "url": "https://ucinlp.github.io/drop/paper.html",
                "snippet": "Q: 'Which team scored the fewest?' ANSWER: Team B",
            }
        ],
        "date duration": [
            {
                "title": "Date arithmetic questions",
                "url": "https://ucinlp.github.io/drop/dataset.html",
                "snippet": "Q: 'How many years between the two battles?' ANSWER: 12",
            }
        ],
        "aggregation": [
            {
                "title": "Aggregation over passage values",
                "url": "https://allenai.org/data/drop",
                "snippet": "Q: 'How many total yards of field goals?' ANSWER: 68",
            }
        ],
        "multi-hop": [
            {
                "title": "Multi-hop reading questions",
                "url": "https://hotpotqa.github.io/",
                "snippet": "Chained lookups across sentences before the final count.",
            }
        ],
        "negation": [
            {
                "title": "Negation and exclusion questions",
                "url": "https://ucinlp.github.io/drop/faq.html",
                "snippet": "Q: 'How many scores were NOT field goals?' ANSWER: 1",
            }
        ],
    }

    plan_payload = {
        "swarm_name": "Passage Numerical Reasoning Swarm",
        "summary": (
            "Four specialist agents collaborate in a pipeline: a Passage Analyst "
            "parses the passage into entities, numbers, dates, and spans; a Question "
            "Classifier identifies the reasoning operation; a Reasoning Engine "
            "executes the discrete operation step by step; and an Answer Formatter "
            "validates and emits the final answer after 'ANSWER: '."
        ),
        "coordination_strategy": (
            "Strict sequential pipeline: passage_analyst, then question_classifier, "
            "then reasoning_engine, then answer_formatter."
        ),
        "specs": [
            {
                "spec_id": "passage_analyst",
                "role": "Extracts structured facts from the passage",
                "tools": ["file_generator"],
                "dependencies": [],
                "io_contract": {
                    "description": "Receives raw passage and question; outputs a structured fact table of all entities, numbers, dates, and verbatim spans.",
                    "input_schema": [
                        field_entry("passage", "text", "raw factual passage"),
                        field_entry("question", "text", "used to guide which entity types to prioritize"),
                    ],
                    "output_schema": [
                        field_entry("numbers", "list", "{value, unit, context, entity_ref}"),
                        field_entry("dates", "list", "{raw, normalized_iso, context}"),
                        field_entry("entities", "list", "{name, type, attributes}"),
                        field_entry("candidate_spans", "list", "{span_text, char_start, char_end, span_type}"),
                        field_entry("passage_sentences", "list"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Given '14 points' in the passage, numbers must include {value: 14, unit: 'points'}",
                        "Given 'October 1066', dates must include a normalized ISO entry",
                        "Must not answer the question -- only structure the passage",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not produce any answer or reasoning about the question", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not introduce facts not present in the passage", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "question_classifier",
                "role": "Classifies the reasoning operation required by the question",
                "tools": ["web_search"],
                "dependencies": ["passage_analyst"],
                "io_contract": {
                    "description": "Identifies the operation type and produces a step-by-step reasoning plan with operand references.",
                    "input_schema": [
                        field_entry("question", "text"),
                        field_entry("numbers", "list"),
                        field_entry("dates", "list"),
                        field_entry("entities", "list"),
                        field_entry("candidate_spans", "list"),
                    ],
                    "output_schema": [
                        field_entry("operation_type", "text", "one of: arithmetic_difference | entity_counting | span_extraction | sorting_ranking | date_duration | aggregation_summation | conditional_multihop | negation_exclusion | comparison_boolean | unanswerable"),
                        field_entry("reasoning_plan", "list", "numbered step-by-step plan for the Reasoning Engine"),
                        field_entry("required_operands", "list", "{operand_ref, source, role}"),
                        field_entry("confidence", "number", "0.0-1.0"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Given 'How many more...', must classify as 'arithmetic_difference'",
                        "Given 'How many players...', must classify as 'entity_counting'",
                        "reasoning_plan must contain at least one step",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not compute the final answer", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not produce more than one operation_type", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "reasoning_engine",
                "role": "Executes the discrete reasoning operation and computes the raw answer",
                "tools": ["file_generator"],
                "dependencies": ["passage_analyst", "question_classifier"],
                "io_contract": {
                    "description": "Executes arithmetic, counting, sorting, date arithmetic, span extraction, or multi-hop reasoning step by step.",
                    "input_schema": [
                        field_entry("question", "text"),
                        field_entry("numbers", "list"),
                        field_entry("dates", "list"),
                        field_entry("entities", "list"),
                        field_entry("candidate_spans", "list"),
                        field_entry("passage_sentences", "list"),
                        field_entry("operation_type", "text"),
                        field_entry("reasoning_plan", "list"),
                        field_entry("required_operands", "list"),
                    ],
                    "output_schema": [
                        field_entry("raw_answer", "number", "bare computed answer"),
                        field_entry("answer_type", "text", "number | span | date"),
                        field_entry("chain_of_thought", "list", "one entry per reasoning step with intermediate results"),
                        field_entry("supporting_evidence", "list", "passage sentences used as evidence"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "Given operation_type='arithmetic_difference' with operands 14 and 7, raw_answer must be 7",
                        "chain_of_thought must contain at least as many entries as reasoning_plan steps",
                        "supporting_evidence must be non-empty for answerable questions",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not introduce facts not present in the structured fact table", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not skip steps listed in reasoning_plan", "kind": "model_judged", "pattern": ""},
                    ],
                },
            },
            {
                "spec_id": "answer_formatter",
                "role": "Validates, formats, and emits the final compliant answer",
                "tools": ["file_generator"],
                "dependencies": ["reasoning_engine", "question_classifier"],
                "io_contract": {
                    "description": "Validates raw_answer against answer_type, formats it, and assembles the final output with chain-of-thought followed by 'ANSWER: <value>' on the last line.",
                    "input_schema": [
                        field_entry("question", "text"),
                        field_entry("raw_answer", "number"),
                        field_entry("answer_type", "text"),
                        field_entry("operation_type", "text"),
                        field_entry("chain_of_thought", "list"),
                        field_entry("supporting_evidence", "list"),
                    ],
                    "output_schema": [
                        field_entry("final_output", "text", "full response ending with 'ANSWER: <formatted_answer>' on the last line"),
                        field_entry("formatted_answer", "text", "the bare answer (number, short phrase, or date)"),
                        field_entry("validation_status", "text", "VALID | INVALID | UNANSWERABLE"),
                    ],
                },
                "verification_criteria": {
                    "behavioral_assertions": [
                        "final_output must end with a line matching 'ANSWER: <value>' exactly",
                        "formatted_answer must be a bare number, short phrase, or date -- not a full sentence",
                        "If validation_status is INVALID, final_output must still contain the best-supported answer",
                    ],
                    "required_tools": [],
                    "forbidden_patterns": [
                        {"text": "Must not omit the 'ANSWER: ' prefix", "kind": "model_judged", "pattern": ""},
                        {"text": "Must not emit a full sentence as the answer", "kind": "regex", "pattern": FULL_SENTENCE_ANSWER_PATTERN},
                    ],
                },
            },
        ],
        "dag_edges": [
            {"from_spec": "passage_analyst", "to_spec": "question_classifier"},
            {"from_spec": "passage_analyst", "to_spec": "reasoning_engine"},
            {"from_spec": "question_classifier", "to_spec": "reasoning_engine"},
            {"from_spec": "reasoning_engine", "to_spec": "answer_formatter"},
            {"from_spec": "question_classifier", "to_spec": "answer_formatter"},
        ],
    }

    directive_hits = {
        "passage_analyst": [
            {
                "title": "Entity and number extraction from text",
                "url": "https://spacy.io/usage/linguistic-features",
                "snippet": "Named entity recognition and numeric normalization approaches.",
            }
        ],
        "question_classifier": [
            {
                "title": "Discrete reasoning operation taxonomies",
                "url": "https://ucinlp.github.io/drop/",
                "snippet": "Question classification for reading comprehension.",
            }
        ],
        "reasoning_engine": [
            {
                "title": "Numerical reasoning over unstructured text",
                "url": "https://allenai.org/data/drop",
                "snippet": "Counting, arithmetic, and date computation over passages.",
            }
        ],
        "answer_formatter": [
            {
                "title": "Short-answer formatting conventions",
                "url": "https://rajpurkar.github.io/SQuAD-explorer/",
                "snippet": "Answer normalization and validation for short answers.",
            }
        ],
    }

    summaries = {
        "passage_analyst": (
            "Searched for named entity recognition and number extraction approaches "
            "for factual passages; normalize units and keep verbatim spans."
        ),
        "question_classifier": (
            "Searched for discrete reasoning operation taxonomies and question "
            "classification techniques for reading comprehension."
        ),
        "reasoning_engine": (
            "Searched for numerical reasoning approaches over unstructured text, "
            "including counting, arithmetic, and date computation."
        ),
        "answer_formatter": (
            "Searched for answer formatting conventions and validation approaches "
            "for short-answer reading comprehension."
        ),
    }

    recommendations = {
        "passage_analyst": [
            {
                "name": "spaCy NER pipeline",
                "url": "https://spacy.io/",
                "description": "Entity extraction reference implementation.",
                "auth_method": "none",
                "relevance_score": 0.7,
            }
        ]
    }

    run_outputs = {
        "passage_analyst": {
            "numbers": [
                {"value": 10, "unit": "yards", "context": "10-yard touchdown pass", "entity_ref": "Chaz Schilens"},
                {"value": 28, "unit": "yards", "context": "28-yard field goal", "entity_ref": "Kris Brown"},
                {"value": 40, "unit": "yards", "context": "40-yard field goal", "entity_ref": "Sebastian Janikowski"},
                {"value": 16, "unit": "week", "context": "Week 16 duel", "entity_ref": None},
            ],
            "dates": [],
            "entities": [
                {"name": "Chaz Schilens", "type": "person", "attributes": [{"key": "play", "value": "TD catch"}]},
                {"name": "JaMarcus Russell", "type": "person", "attributes": [{"key": "play", "value": "TD pass"}]},
                {"name": "Kris Brown", "type": "person", "attributes": [{"key": "play", "value": "FG"}]},
                {"name": "Sebastian Janikowski", "type": "person", "attributes": [{"key": "play", "value": "FG"}]},
                {"name": "Raiders", "type": "team", "attributes": [{"key": "aka", "value": "Oakland"}]},
                {"name": "Texans", "type": "team", "attributes": [{"key": "aka", "value": "Houston"}]},
            ],
            "candidate_spans": [
                {"span_text": "28-yard field goal", "char_start": 243, "char_end": 261, "span_type": "phrase"},
                {"span_text": "40-yard field goal", "char_start": 340, "char_end": 358, "span_type": "phrase"},
                {"span_text": "first quarter", "char_start": 205, "char_end": 218, "span_type": "phrase"},
            ],
            "passage_sentences": [
                "Hoping to rebound from their loss to the Patriots, the Raiders stayed at home for a Week 16 duel with the Houston Texans.",
                "Oakland took the early lead when Chaz Schilens hauled in a 10-yard touchdown pass from JaMarcus Russell in the first quarter.",
                "The Texans responded with a 28-yard field goal by Kris Brown.",
                "In the second quarter, Oakland extended its lead with a Sebastian Janikowski 40-yard field goal.",
            ],
        },
        "question_classifier": {
            "operation_type": "entity_counting",
            "reasoning_plan": [
                "1. Identify all field goal events in the passage",
                "2. Count the distinct field goal events",
                "3. Return the count",
            ],
            "required_operands": [
                {"operand_ref": "Kris Brown FG", "source": "entities", "role": "count_target"},
                {"operand_ref": "Janikowski FG", "source": "entities", "role": "count_target"},
            ],
            "confidence": 0.95,
        },
        "reasoning_engine": {
            "raw_answer": 2,
            "answer_type": "number",
            "chain_of_thought": [
                "Step 1: Field goals in passage: (a) 28-yard FG by Kris Brown, (b) 40-yard FG by Janikowski.",
                "Step 2: Count = 2.",
                "Step 3: Verify -- no other field goals mentioned.",
            ],
            "supporting_evidence": [
                "The Texans responded with a 28-yard field goal by Kris Brown.",
                "In the second quarter, Oakland extended its lead with a Sebastian Janikowski 40-yard field goal.",
            ],
        },
        "answer_formatter": {
            "final_output": (
                "Step 1: Field goals in passage: (a) 28-yard FG by Kris Brown, "
                "(b) 40-yard FG by Janikowski.\nStep 2: Count = 2.\nStep 3: "
                "Verified -- no other FGs mentioned.\n\nANSWER: 2"
            ),
            "formatted_answer": "2",
            "validation_status": "VALID",
        },
    }


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------

DEMOS = [FunctionCompletionDemo(), CompetitionMathDemo(), ReadingComprehensionDemo()]

# Ablation variants recorded for the function-completion demo so the flags
# replay offline. (flag kwargs for RunConfig, wrapped task input or None)
ABLATION_VARIANTS = [
    {},
    {"no_intent_analysis": True},
    {"no_planning": True},
    {"no_grounding": True},
    {"no_verification": True},
]


def record_demo(demo: Demo, record_ablations: bool) -> None:
    demo_dir = DEMOS_DIR / demo.name
    demo_dir.mkdir(parents=True, exist_ok=True)
    (demo_dir / "task.txt").write_text(demo.task_text, encoding="utf-8")
    (demo_dir / "input.json").write_text(
        json.dumps(demo.task_input, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    transcript_path = demo_dir / "transcript.json"
    if transcript_path.exists():
        transcript_path.unlink()

    variants = ABLATION_VARIANTS if record_ablations else [{}]
    for flags in variants:
        backend = RecordingBackend(RuleBackend(demo), transcript_path)
        config = cli.RunConfig(mode="record", transcript=str(transcript_path), **flags)
        trace = TraceLog()
        bundle, _intent, _plan, _grounding = cli.construct_bundle(
            demo.task_text, backend, config, trace
        )
        task_input = {"task": demo.task_input} if flags.get("no_planning") else demo.task_input
        workdir = Path(tempfile.mkdtemp(prefix="swarmforge-demo-"))
        try:
            result = execute_swarm(
                bundle,
                task_input,
                RecoveryBudgets(),
                backend,
                trace=TraceLog(),
                serial=True,
                run_dir=workdir,
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)
        assert result.success, f"{demo.name} variant {flags} did not complete"
    print(f"recorded {demo.name}: {transcript_path}")


def main() -> int:
    for demo in DEMOS:
        record_demo(demo, record_ablations=demo.name == "function_completion")
    return 0


if __name__ == "__main__":
    sys.exit(main())
