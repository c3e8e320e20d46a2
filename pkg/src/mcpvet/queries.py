"""Intent-aligned user query generation for the simulated host.

Queries must stay semantically faithful to the tool's function intent while
varying phrasing, so the agent triggers the tool the way real users would.
"""

from __future__ import annotations

from dataclasses import dataclass

from .llm import LlmBackend, LlmRequest, parse_json_reply

DEFAULT_QUERY_COUNT = 3


@dataclass
class QuerySet:
    tool_name: str
    queries: list[str]


GENERATE_SYSTEM = """\
You write user queries for exercising an MCP tool inside an agent host.
Given the tool name and its function intent, produce realistic natural
language requests a user might type. Two constraints:
1. Semantic consistency: every query asks for the same capability the
   intent describes.
2. Expression diversity: vary the style across direct instructions,
   goal-oriented phrasings, procedural requests, and at least one query
   mentioning the tool name explicitly.
Do not mention scanners, sandboxes, or internal paths; queries should read
like ordinary usage.

Reply with JSON: {"queries": ["...", ...]} containing exactly the
requested number of entries.
"""


def generate_queries(tool_name: str, function_intent: str, n: int,
                     llm: LlmBackend) -> QuerySet:
    """Exactly n pairwise-distinct queries for one tool.

    If the model under-delivers or repeats itself, one regeneration round
    is attempted; any remaining gap is padded deterministically with a
    variant suffix so the output size never depends on LLM verbosity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not function_intent:
        raise ValueError("function_intent must be non-empty")

    collected: list[str] = []
    for attempt in range(2):
        wanted = n - len(collected)
        if wanted <= 0:
            break
        user = (
            f"Tool name: {tool_name}\n"
            f"Function intent: {function_intent}\n"
            f"Number of queries: {wanted}"
        )
        if attempt == 1:
            user += "\nAvoid repeating these:\n" + "\n".join(collected)
        req = LlmRequest(
            messages=[{"role": "system", "content": GENERATE_SYSTEM},
                      {"role": "user", "content": user}],
            purpose="query_gen",
        )
        parsed = parse_json_reply(llm.complete(req))
        raw = parsed.get("queries", []) if parsed else []
        if isinstance(raw, str):
            raw = [raw]
        for query in raw:
            query = str(query).strip()
            if query and query not in collected:
                collected.append(query)
            if len(collected) >= n:
                break

    # Last resort: pad with suffixed variants so |queries| == n holds.
    base = collected[0] if collected else f"Use the {tool_name} tool as intended."
    k = 2
    while len(collected) < n:
        candidate = f"{base} (variant {k})"
        if candidate not in collected:
            collected.append(candidate)
        k += 1
    return QuerySet(tool_name=tool_name, queries=collected[:n])
