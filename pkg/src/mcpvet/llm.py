"""Uniform LLM access: an HTTP chat-completion client and a scripted mock.

Every analysis role (config judging, intent inspection, query generation,
code semantics, deviation judging, the simulated-host agent) goes through
the same ``LlmBackend.complete`` call so tests can swap in a deterministic
mock and the scan pipeline can log request/response pairs verbatim.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field

# Request purposes. Per-role model names can be configured for the HTTP
# backend (the agent model is typically distinct from the analysis model).
PURPOSES = (
    "config_judge",
    "intent_inspect",
    "query_gen",
    "semantics",
    "deviation_judge",
    "agent",
)

ENDPOINT_ENV = "MCPVET_LLM_ENDPOINT"
API_KEY_ENV = "MCPVET_LLM_API_KEY"
MODEL_ENV = "MCPVET_LLM_MODEL"


class LlmUnavailable(Exception):
    """The configured backend could not produce a completion."""


class NoMockRule(Exception):
    """Strict mock saw a request no rule matches."""


@dataclass
class LlmRequest:
    messages: list[dict]  # [{"role": ..., "content": ...}]
    purpose: str
    response_format_json: bool = True

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose: {self.purpose}")

    def text(self) -> str:
        return "\n".join(str(m.get("content", "")) for m in self.messages)


class LlmBackend:
    """Base backend; records request/response pairs when a log is attached."""

    def __init__(self):
        self.transcript: list[dict] = []

    def complete(self, req: LlmRequest) -> str:
        response = self._complete(req)
        self.transcript.append(
            {
                "purpose": req.purpose,
                "messages": req.messages,
                "response": response,
            }
        )
        return response

    def _complete(self, req: LlmRequest) -> str:  # pragma: no cover - abstract
        raise NotImplementedError


class HttpBackend(LlmBackend):
    """OpenAI-style chat-completions client.

    Configuration comes from MCPVET_LLM_ENDPOINT / MCPVET_LLM_API_KEY /
    MCPVET_LLM_MODEL; a per-role model can be set via
    MCPVET_LLM_MODEL_<PURPOSE> (e.g. MCPVET_LLM_MODEL_AGENT).
    Temperature is pinned to 0 and only the first choice is used.
    """

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, timeout: float = 120.0):
        super().__init__()
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.model = model or os.environ.get(MODEL_ENV, "")
        self.timeout = timeout
        if not self.endpoint:
            raise LlmUnavailable(f"no endpoint configured ({ENDPOINT_ENV})")

    def _model_for(self, purpose: str) -> str:
        return os.environ.get(f"{MODEL_ENV}_{purpose.upper()}", self.model)

    def _complete(self, req: LlmRequest) -> str:
        payload = {
            "model": self._model_for(req.purpose),
            "messages": req.messages,
            "temperature": 0,
        }
        if req.response_format_json:
            payload["response_format"] = {"type": "json_object"}
        url = self.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(
            url, data=json.dumps(payload).encode(), headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise LlmUnavailable(str(exc)) from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LlmUnavailable(f"malformed completion response: {exc}") from exc


@dataclass
class MockRule:
    """One scripted rule: purpose/content predicates mapping to a response.

    ``contains`` substrings must all appear in the concatenated message
    text. ``uses`` bounds how many times the rule may fire (0 = unlimited),
    which lets a script drive a multi-turn agent deterministically.
    """

    response: str
    purpose: str | None = None
    contains: list[str] = field(default_factory=list)
    not_contains: list[str] = field(default_factory=list)
    uses: int = 0
    _fired: int = 0

    def matches(self, req: LlmRequest) -> bool:
        if self.uses and self._fired >= self.uses:
            return False
        if self.purpose is not None and self.purpose != req.purpose:
            return False
        text = req.text()
        if any(needle not in text for needle in self.contains):
            return False
        if any(needle in text for needle in self.not_contains):
            return False
        return True


class MockBackend(LlmBackend):
    """Deterministic scripted backend for hermetic tests.

    Rules are evaluated in order; the first match wins. In strict mode an
    unmatched request raises NoMockRule; otherwise "{}" is returned so the
    callers' unparseable-output paths stay exercisable.
    """

    def __init__(self, rules: list[MockRule] | None = None, strict: bool = False):
        super().__init__()
        self.rules = list(rules or [])
        self.strict = strict

    @classmethod
    def from_script(cls, path: str, strict: bool = False) -> "MockBackend":
        """Load a JSON-lines script: one rule object per line."""
        rules = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: bad rule: {exc}") from exc
                rules.append(cls._rule_from_dict(raw))
        return cls(rules, strict=strict)

    @staticmethod
    def _rule_from_dict(raw: dict) -> MockRule:
        response = raw["response"]
        if not isinstance(response, str):
            response = json.dumps(response)
        contains = raw.get("contains", [])
        if isinstance(contains, str):
            contains = [contains]
        not_contains = raw.get("not_contains", [])
        if isinstance(not_contains, str):
            not_contains = [not_contains]
        return MockRule(
            response=response,
            purpose=raw.get("purpose"),
            contains=list(contains),
            not_contains=list(not_contains),
            uses=int(raw.get("uses", 0)),
        )

    def add_rule(self, response, purpose=None, contains=(), not_contains=(), uses=0):
        if not isinstance(response, str):
            response = json.dumps(response)
        self.rules.append(
            MockRule(
                response=response,
                purpose=purpose,
                contains=list(contains) if not isinstance(contains, str) else [contains],
                not_contains=list(not_contains)
                if not isinstance(not_contains, str)
                else [not_contains],
                uses=uses,
            )
        )

    def _complete(self, req: LlmRequest) -> str:
        for rule in self.rules:
            if rule.matches(req):
                rule._fired += 1
                return rule.response
        if self.strict:
            raise NoMockRule(f"no rule for purpose={req.purpose}")
        return "{}"


def parse_json_reply(text: str) -> dict | None:
    """Best-effort extraction of a JSON object from an LLM reply.

    Accepts raw objects, fenced code blocks, or an object embedded in
    surrounding prose. Returns None when nothing parseable is found.
    """
    text = text.strip()
    if text.startswith("```"):
        text = text.strip("`")
        if text.startswith("json"):
            text = text[4:]
        text = text.strip()
    try:
        parsed = json.loads(text)
        return parsed if isinstance(parsed, dict) else None
    except json.JSONDecodeError:
        pass
    start = text.find("{")
    end = text.rfind("}")
    if start != -1 and end > start:
        try:
            parsed = json.loads(text[start : end + 1])
            return parsed if isinstance(parsed, dict) else None
        except json.JSONDecodeError:
            return None
    return None
