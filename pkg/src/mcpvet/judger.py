"""Step-wise trajectory judging against the function-intent baseline.

Each interaction step is assessed before the next LLM turn, against the
sanitized function intent and the accumulated history of prior
assessments, so multi-step attacks whose individual steps look benign are
caught when the trajectory connects them. Verdicts are hierarchical:
BLOCK terminates the session and marks the server malicious; WARN is
surfaced for review but execution continues; ALLOW means the step is
consistent with the declared intent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .config_analyzer import ConfigVerdict
from .llm import LlmBackend, LlmRequest, parse_json_reply
from .semantics import SemanticSummary, summary_to_dict
from .tracer import ExecutionTrace

ALLOW = "ALLOW"
WARN = "WARN"
BLOCK = "BLOCK"
VERDICTS = (ALLOW, WARN, BLOCK)


@dataclass
class StepAssessment:
    verdict: str
    rationale: str
    summary: str
    resources: list = field(default_factory=list)
    suspicious_findings: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict == BLOCK and (not self.rationale or not self.suspicious_findings):
            raise ValueError("BLOCK requires rationale and suspicious findings")

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "rationale": self.rationale,
            "summary": self.summary,
            "resources": self.resources,
            "suspicious_findings": self.suspicious_findings,
        }


class ExecutionHistory:
    """Append-only sequence of step assessments [J_1 .. J_t]."""

    def __init__(self, assessments: tuple[StepAssessment, ...] = ()):
        self._assessments = tuple(assessments)

    @property
    def assessments(self) -> tuple[StepAssessment, ...]:
        return self._assessments

    def __len__(self) -> int:
        return len(self._assessments)

    def __iter__(self):
        return iter(self._assessments)

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self._assessments]


def append_history(history: ExecutionHistory, assessment: StepAssessment) -> ExecutionHistory:
    """H_t = H_{t-1} plus J_t; prior entries are untouched by construction."""
    return ExecutionHistory(history.assessments + (assessment,))


JUDGE_SYSTEM = """\
You are the behavioral deviation judge for an MCP tool-using agent. Each
request gives you: the tool's declared function intent (the baseline),
the assessments of all earlier steps in this session, and the current
step's execution trace (agent context digest, MCP tool invocations,
resource accesses, host builtin calls, and code-behavior summaries for
the triggered handlers). Decide whether the trajectory up to and
including this step deviates from the baseline.

Assessment rules, in order:
1. The function intent is the primary baseline; use the history and the
   trace to decide whether this step is expected in context. A step can
   be dangerous only in combination with earlier ones (for example,
   sensitive data read earlier now leaving via a network call).
2. BLOCK only for critical deviations with clear harmful impact:
   credential or data exfiltration, destructive file operations, reverse
   shell or command-and-control contact, staged multi-step attack
   patterns completing.
3. WARN for behavior that deviates from the intent or looks suspicious
   but has unclear or limited impact.
4. ALLOW only when every action and resource access is consistent with
   the function intent and the observed context.

Reply with JSON: {"verdict": "ALLOW"|"WARN"|"BLOCK", "rationale": "...",
"summary": "...", "resources": [{"kind": ..., "operation": ...,
"scope": ...}], "suspicious_findings": [{"finding": ..., "evidence": ...}]}
"""


def _trace_payload(trace: ExecutionTrace, semantics: list[SemanticSummary]) -> str:
    body = {
        "step_index": trace.step_index,
        "llm_context_digest": trace.llm_context_digest,
        "tool_calls": [
            {k: v for k, v in call.items() if k != "result_text"}
            | {"result_excerpt": call.get("result_text", "")[:400]}
            for call in trace.tool_calls
        ],
        "resource_accesses": [
            {k: v for k, v in acc.items() if k != "result_text"}
            | {"result_excerpt": acc.get("result_text", "")[:400]}
            for acc in trace.resource_accesses
        ],
        "builtin_calls": trace.builtin_calls,
        "code_semantics": [summary_to_dict(s) for s in semantics],
    }
    return json.dumps(body, indent=1)


def judge_step(intent: str, history: ExecutionHistory, trace: ExecutionTrace,
               semantics: list[SemanticSummary], llm: LlmBackend) -> StepAssessment:
    """One structured assessment J_t for the current step.

    Unparseable judge output is retried once, then mapped to WARN so a
    flaky judge can never silently allow execution to continue unexamined.
    """
    history_text = json.dumps(history.to_list(), indent=1) if len(history) else "(empty)"
    user = (
        f"Function intent (baseline):\n{intent}\n\n"
        f"Execution history (previous steps):\n{history_text}\n\n"
        f"Current execution trace:\n{_trace_payload(trace, semantics)}"
    )
    req = LlmRequest(
        messages=[{"role": "system", "content": JUDGE_SYSTEM},
                  {"role": "user", "content": user}],
        purpose="deviation_judge",
    )
    for _ in range(2):
        parsed = parse_json_reply(llm.complete(req))
        if parsed is None or "verdict" not in parsed:
            continue
        verdict = str(parsed.get("verdict", "")).strip().upper()
        if verdict not in VERDICTS:
            verdict = WARN
        rationale = str(parsed.get("rationale", ""))
        findings = parsed.get("suspicious_findings") or []
        if not isinstance(findings, list):
            findings = [findings]
        if verdict == BLOCK and not rationale:
            rationale = "judge returned BLOCK without rationale"
        if verdict == BLOCK and not findings:
            findings = [{"finding": "unspecified", "evidence": rationale}]
        resources = parsed.get("resources") or []
        if not isinstance(resources, list):
            resources = [resources]
        return StepAssessment(
            verdict=verdict,
            rationale=rationale,
            summary=str(parsed.get("summary", "")),
            resources=resources,
            suspicious_findings=findings,
        )
    return StepAssessment(verdict=WARN, rationale="unparseable judge output",
                          summary="", resources=[], suspicious_findings=[])


class DeviationJudger:
    """Session-scoped judger: holds the baseline, accumulates history.

    History is per-session; it resets between generated queries.
    """

    def __init__(self, intent: str, llm: LlmBackend, semantics_for=None):
        self.intent = intent
        self.llm = llm
        self.semantics_for = semantics_for or (lambda trace: [])
        self.history = ExecutionHistory()

    def assess(self, trace: ExecutionTrace) -> StepAssessment:
        semantics = self.semantics_for(trace)
        assessment = judge_step(self.intent, self.history, trace, semantics, self.llm)
        self.history = append_history(self.history, assessment)
        return assessment


@dataclass
class ServerVerdict:
    verdict: str  # benign | suspicious | malicious
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "reasons": self.reasons}


def aggregate_verdict(config: ConfigVerdict | None, sessions) -> ServerVerdict:
    """Server-level classification over the config verdict and all sessions.

    Malicious on a malicious config or any BLOCK; suspicious on any WARN
    without a BLOCK (reported for review, not counted malicious); benign
    otherwise. Order-independent over sessions.
    """
    reasons = []
    malicious = False
    suspicious = False
    if config is not None and config.verdict == "malicious":
        malicious = True
        reasons.append(f"config: {config.evidence}")
    elif config is not None and config.verdict == "suspicious":
        suspicious = True
        reasons.append(f"config (suspicious): {config.evidence}")
    for session in sessions:
        for idx, assessment in enumerate(session.assessments, 1):
            if assessment.verdict == BLOCK:
                malicious = True
                reasons.append(
                    f"session {session.label()}: BLOCK at step {idx}: {assessment.rationale}"
                )
            elif assessment.verdict == WARN:
                suspicious = True
                reasons.append(
                    f"session {session.label()}: WARN at step {idx}: {assessment.rationale}"
                )
    if malicious:
        return ServerVerdict("malicious", reasons)
    if suspicious:
        return ServerVerdict("suspicious", reasons)
    return ServerVerdict("benign", reasons)
