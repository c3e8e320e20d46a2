"""Structured semantic summaries of code slices, extracted by an LLM.

The summary is conservative: grounded only in the provided slice text,
with uncertain elements marked "unknown". It is evidence for the deviation
judger, not a maliciousness verdict by itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..llm import LlmBackend, LlmRequest, parse_json_reply

EXTRACT_SYSTEM = """\
You are a code behavior analyst. You receive a code slice: the
security-relevant statements of one triggered function, possibly spanning
callee functions, each line tagged with its source location. Produce a
structured behavioral summary grounded strictly in this code; if something
cannot be determined from the slice, write "unknown". Do not guess.

Cover:
- the function's observable purpose and side effects;
- primary operations (file reads/writes, command execution, network
  fetches, environment access, and similar);
- every resource touched, with access mode and scope;
- data flows not sourced from parameters whose source or sink is a
  sensitive operation;
- conditions gating side effects (flags, checks, sandbox-bypass guards);
- for each parameter: which sinks it reaches and the risk class if any
  (path traversal, command injection, and similar).

Reply with JSON:
{"summary": "...", "key_actions": [...], "resources": [{"kind": ...,
"access_mode": ..., "scope": ...}], "dataflow": [...],
"control_flow_triggers": [...], "parameter_behavior_map": {"<param>":
{"sinks": [...], "risk_class": "..."}}}
"""


@dataclass
class SemanticSummary:
    summary: str = "unknown"
    key_actions: list = field(default_factory=list)
    resources: list = field(default_factory=list)
    dataflow: list = field(default_factory=list)
    control_flow_triggers: list = field(default_factory=list)
    parameter_behavior_map: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def summary_to_dict(summary: SemanticSummary) -> dict:
    return {
        "summary": summary.summary,
        "key_actions": list(summary.key_actions),
        "resources": list(summary.resources),
        "dataflow": list(summary.dataflow),
        "control_flow_triggers": list(summary.control_flow_triggers),
        "parameter_behavior_map": dict(summary.parameter_behavior_map),
    }


def extract_semantics(slice_text: str, llm: LlmBackend) -> SemanticSummary:
    """One structured summary per rendered slice; degrades, never raises,
    on unparseable model output (minimal summary after one retry)."""
    req = LlmRequest(
        messages=[{"role": "system", "content": EXTRACT_SYSTEM},
                  {"role": "user", "content": f"Code slice:\n{slice_text}"}],
        purpose="semantics",
    )
    for _ in range(2):
        parsed = parse_json_reply(llm.complete(req))
        if parsed is None or "summary" not in parsed:
            continue
        pbm = parsed.get("parameter_behavior_map") or {}
        if not isinstance(pbm, dict):
            pbm = {}
        return SemanticSummary(
            summary=str(parsed.get("summary") or "unknown"),
            key_actions=_as_list(parsed.get("key_actions")),
            resources=_as_list(parsed.get("resources")),
            dataflow=_as_list(parsed.get("dataflow")),
            control_flow_triggers=_as_list(parsed.get("control_flow_triggers")),
            parameter_behavior_map=pbm,
        )
    return SemanticSummary(warnings=["unparseable semantics output; minimal summary"])


def _as_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, list):
        return value
    return [value]
