"""Scan report schema checks.

Reports are plain JSON with a pinned report_version. Validation checks
both shape (required fields, field types) and consistency: the recorded
server_verdict must equal what the aggregation rule yields over the
embedded config verdict and session assessments.
"""

from __future__ import annotations

import json
from pathlib import Path

REQUIRED_TOP_LEVEL = (
    "report_version",
    "server",
    "config_verdict",
    "tools",
    "sessions",
    "server_verdict",
    "artifacts",
    "timing",
)

_VERDICTS = ("benign", "suspicious", "malicious")
_STEP_VERDICTS = ("ALLOW", "WARN", "BLOCK")


def validate_report(path_or_dict) -> list[str]:
    """Return a list of schema/consistency errors; empty means valid."""
    if isinstance(path_or_dict, (str, Path)):
        try:
            report = json.loads(Path(path_or_dict).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            return [f"unreadable report: {exc}"]
    else:
        report = path_or_dict

    errors = []
    for key in REQUIRED_TOP_LEVEL:
        if key not in report:
            errors.append(f"missing required field: {key}")
    if errors:
        return errors

    if report["report_version"] != 1:
        errors.append(f"unsupported report_version: {report['report_version']}")

    config = report["config_verdict"]
    if config.get("verdict") not in _VERDICTS:
        errors.append(f"config_verdict.verdict invalid: {config.get('verdict')!r}")
    if config.get("verdict") == "malicious" and not config.get("evidence"):
        errors.append("config_verdict: malicious verdict requires evidence")

    server = report["server_verdict"]
    if server.get("verdict") not in _VERDICTS:
        errors.append(f"server_verdict.verdict invalid: {server.get('verdict')!r}")

    step_verdicts = []
    for s_idx, session in enumerate(report["sessions"]):
        for key in ("tool", "query", "status", "traces", "assessments"):
            if key not in session:
                errors.append(f"sessions[{s_idx}]: missing field {key}")
        for a_idx, assessment in enumerate(session.get("assessments", [])):
            verdict = assessment.get("verdict")
            if verdict not in _STEP_VERDICTS:
                errors.append(
                    f"sessions[{s_idx}].assessments[{a_idx}]: bad verdict {verdict!r}"
                )
            else:
                step_verdicts.append(verdict)
            if verdict == "BLOCK" and not assessment.get("rationale"):
                errors.append(
                    f"sessions[{s_idx}].assessments[{a_idx}]: BLOCK without rationale"
                )

    expected = _expected_verdict(config.get("verdict"), step_verdicts)
    if server.get("verdict") in _VERDICTS and server.get("verdict") != expected:
        errors.append(
            f"server_verdict {server.get('verdict')!r} inconsistent with embedded "
            f"data (expected {expected!r})"
        )
    return errors


def _expected_verdict(config_verdict: str | None, step_verdicts: list[str]) -> str:
    if config_verdict == "malicious" or "BLOCK" in step_verdicts:
        return "malicious"
    if config_verdict == "suspicious" or "WARN" in step_verdicts:
        return "suspicious"
    return "benign"
