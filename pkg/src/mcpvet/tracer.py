"""Per-step execution traces and triggered-handler resolution.

Handler locations come from two sources: a runtime shim injected at
interpreter startup into the child server (it appends handler-entry events
as JSON lines to a side-channel file named by an environment variable),
and a static registration-site scan of the server sources used as a
fallback whenever shim events are missing. Instrumentation problems
degrade the mode; they never abort a scan.

Side channel contract (documented in the report bundle): the child reads
the target path from MCPVET_TRACE_FILE and appends one JSON object per
handler entry: {"kind": "tool_handler"|"resource_handler", "name": ...,
"qualified_name": ..., "file": ..., "line": ..., "col": ...}.
"""

from __future__ import annotations

import ast
import hashlib
import importlib.util
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

TRACE_FILE_ENV = "MCPVET_TRACE_FILE"

SITECUSTOMIZE = """\
# Injected by the scanner to activate handler tracing in child servers.
import os
if os.environ.get("{env}"):
    try:
        from mcpvet_fixtures import shim as _shim
        _shim.activate()
    except Exception:
        pass
"""


class InstrumentationFailed(Exception):
    pass


@dataclass
class TriggeredFunction:
    file: str
    line: int
    col: int
    qualified_name: str

    def to_dict(self) -> dict:
        return {"file": self.file, "line": self.line, "col": self.col,
                "qualified_name": self.qualified_name}


@dataclass
class ExecutionTrace:
    step_index: int
    llm_context_digest: str
    tool_calls: list[dict] = field(default_factory=list)
    resource_accesses: list[dict] = field(default_factory=list)
    builtin_calls: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "llm_context_digest": self.llm_context_digest,
            "tool_calls": self.tool_calls,
            "resource_accesses": self.resource_accesses,
            "builtin_calls": self.builtin_calls,
            "warnings": self.warnings,
        }


def digest(text: str, head: int = 80) -> str:
    """Bounded fingerprint of arbitrarily large text: length+hash+head."""
    data = text.encode("utf-8", errors="replace")
    return (f"len={len(data)};sha256={hashlib.sha256(data).hexdigest()[:12]};"
            f"head={text[:head]!r}")


# -- static registration scan ------------------------------------------------


@dataclass
class RegistrationIndex:
    tools: dict[str, TriggeredFunction] = field(default_factory=dict)
    resources: dict[str, TriggeredFunction] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


_JS_TOOL_RE = re.compile(
    r"(?:registerTool|\.tool)\s*\(\s*\{[^}]*?name\s*:\s*[\"']([^\"']+)[\"']",
    re.DOTALL,
)


def scan_registrations(source_root: str | Path) -> RegistrationIndex:
    """Map tool/resource names to handler definition sites without running.

    Python sources get a proper AST scan that follows decorator
    registration and add_tool(...) style calls to the definition site (so
    re-exported aliases resolve to where the function is defined). Other
    runtimes get a shallow text scan, enough for fallback locations.
    """
    index = RegistrationIndex()
    root = Path(source_root)
    files = sorted(root.rglob("*.py")) if root.is_dir() else [root]
    defs: dict[str, TriggeredFunction] = {}  # function name -> def site
    pending: list[tuple[str, str, str]] = []  # (kind, registered name, fn name)

    for path in files:
        try:
            tree = ast.parse(path.read_text(encoding="utf-8"))
        except (SyntaxError, OSError, UnicodeDecodeError) as exc:
            index.warnings.append(f"skipped {path}: {exc}")
            continue
        module = path.stem
        for node in ast.walk(tree):
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                site = TriggeredFunction(
                    file=str(path), line=node.lineno, col=node.col_offset,
                    qualified_name=f"{module}.{node.name}",
                )
                defs.setdefault(node.name, site)
                for deco in node.decorator_list:
                    kind, name = _decorator_registration(deco, node.name)
                    if kind:
                        target = index.tools if kind == "tool" else index.resources
                        target[name] = site
            elif isinstance(node, ast.Call):
                reg = _call_registration(node)
                if reg:
                    pending.append(reg)

    for kind, name, fn_name in pending:
        site = defs.get(fn_name)
        if site is None:
            continue
        target = index.tools if kind == "tool" else index.resources
        target.setdefault(name, site)

    if root.is_dir():
        for path in sorted(list(root.rglob("*.js")) + list(root.rglob("*.ts"))):
            try:
                text = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError):
                continue
            for match in _JS_TOOL_RE.finditer(text):
                line = text[: match.start()].count("\n") + 1
                index.tools.setdefault(
                    match.group(1),
                    TriggeredFunction(file=str(path), line=line, col=0,
                                      qualified_name=f"{path.stem}.{match.group(1)}"),
                )
    return index


def _decorator_registration(deco, default_name: str) -> tuple[str | None, str]:
    """Recognize @<obj>.tool(...) / @<obj>.resource(...) decorators."""
    call = deco if isinstance(deco, ast.Call) else None
    target = call.func if call else deco
    if not isinstance(target, ast.Attribute) or target.attr not in ("tool", "resource"):
        return None, ""
    name = default_name
    if call:
        for kw in call.keywords:
            if kw.arg == "name" and isinstance(kw.value, ast.Constant):
                name = str(kw.value.value)
        if call.args and isinstance(call.args[0], ast.Constant):
            value = call.args[0].value
            if isinstance(value, str):
                name = value
    if target.attr == "resource" and call:
        # @srv.resource("scheme://uri") registers by URI.
        if call.args and isinstance(call.args[0], ast.Constant):
            return "resource", str(call.args[0].value)
        for kw in call.keywords:
            if kw.arg == "uri" and isinstance(kw.value, ast.Constant):
                return "resource", str(kw.value.value)
    return target.attr, name


def _call_registration(node: ast.Call) -> tuple[str, str, str] | None:
    """Recognize srv.add_tool("name", handler) / add_resource(uri, handler)."""
    func = node.func
    if not isinstance(func, ast.Attribute):
        return None
    if func.attr not in ("add_tool", "register_tool", "add_resource", "register_resource"):
        return None
    if len(node.args) < 2:
        return None
    name_node, handler = node.args[0], node.args[1]
    if not isinstance(name_node, ast.Constant) or not isinstance(handler, ast.Name):
        return None
    kind = "tool" if "tool" in func.attr else "resource"
    return kind, str(name_node.value), handler.id


# -- attachment ----------------------------------------------------------------


@dataclass
class TracerAttachment:
    source_root: str
    mode: str  # "shim" | "static"
    side_channel: str | None = None
    index: RegistrationIndex = field(default_factory=RegistrationIndex)
    warnings: list[str] = field(default_factory=list)
    _offset: int = 0
    _inject_dir: str | None = None
    _pending_context: str = ""
    _pending_tool_calls: list[dict] = field(default_factory=list)
    _pending_resources: list[dict] = field(default_factory=list)
    _pending_builtins: list[dict] = field(default_factory=list)

    def extra_env(self) -> dict[str, str]:
        """Environment to inject into the child for shim activation."""
        if self.mode != "shim" or not self.side_channel:
            return {}
        pythonpath = self._inject_dir or ""
        shim_spec = importlib.util.find_spec("mcpvet_fixtures")
        if shim_spec and shim_spec.origin:
            pkg_dir = str(Path(shim_spec.origin).parent.parent)
            pythonpath = pythonpath + os.pathsep + pkg_dir if pythonpath else pkg_dir
        existing = os.environ.get("PYTHONPATH", "")
        if existing:
            pythonpath = pythonpath + os.pathsep + existing if pythonpath else existing
        env = {TRACE_FILE_ENV: self.side_channel}
        if pythonpath:
            env["PYTHONPATH"] = pythonpath
        return env

    # Hosts push what they executed; collect_trace drains per step.

    def record_context(self, text: str):
        self._pending_context = text

    def record_tool_call(self, name: str, args: dict, result_text: str):
        self._pending_tool_calls.append(
            {"name": name, "args": args, "result_digest": digest(result_text),
             "result_text": result_text}
        )

    def record_resource_access(self, uri: str, result_text: str):
        self._pending_resources.append(
            {"uri": uri, "result_digest": digest(result_text),
             "result_text": result_text}
        )

    def record_builtin_call(self, name: str, args: dict, result_text: str):
        self._pending_builtins.append(
            {"name": name, "args": args, "result_digest": digest(result_text)}
        )


def instrument(handle_or_spec, source_root: str | Path,
               workdir: str | Path | None = None) -> TracerAttachment:
    """Prepare tracing for one server: shim side channel plus static index.

    The shim requires injecting environment before spawn; call this first
    and pass ``attachment.extra_env()`` to spawn_server. When the shim
    module is unavailable the attachment silently runs in static mode.
    """
    source_root = str(source_root)
    index = scan_registrations(source_root)
    mode = "static"
    side_channel = None
    inject_dir = None
    warnings = list(index.warnings)
    try:
        if importlib.util.find_spec("mcpvet_fixtures") is not None:
            base = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="mcpvet-trace-"))
            base.mkdir(parents=True, exist_ok=True)
            side_channel = str(base / "trace_events.jsonl")
            Path(side_channel).touch()
            inject = base / "startup_hook"
            inject.mkdir(exist_ok=True)
            (inject / "sitecustomize.py").write_text(
                SITECUSTOMIZE.format(env=TRACE_FILE_ENV), encoding="utf-8"
            )
            inject_dir = str(inject)
            mode = "shim"
        else:
            warnings.append("shim package unavailable; static fallback engaged")
    except OSError as exc:
        warnings.append(f"instrumentation degraded to static: {exc}")
        mode = "static"
    attachment = TracerAttachment(
        source_root=source_root, mode=mode, side_channel=side_channel,
        index=index, warnings=warnings,
    )
    attachment._inject_dir = inject_dir
    return attachment


def _read_new_events(attachment: TracerAttachment) -> list[dict]:
    if not attachment.side_channel:
        return []
    try:
        with open(attachment.side_channel, encoding="utf-8") as fh:
            fh.seek(attachment._offset)
            chunk = fh.read()
            attachment._offset = fh.tell()
    except OSError:
        return []
    events = []
    for line in chunk.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError:
            continue
    return events


def _static_location(attachment: TracerAttachment, kind: str, key: str,
                     warnings: list[str]) -> TriggeredFunction:
    table = attachment.index.tools if kind == "tool" else attachment.index.resources
    site = table.get(key)
    if site is None and kind == "resource":
        # URI templates: fall back to a prefix match.
        for uri, candidate in table.items():
            if key.startswith(uri.split("{")[0]):
                site = candidate
                break
    if site is None:
        warnings.append(f"no static registration site for {kind} {key!r}")
        return TriggeredFunction(file="<unknown>", line=0, col=0, qualified_name=key)
    return site


def collect_trace(attachment: TracerAttachment, step: int) -> ExecutionTrace:
    """Drain this step's recorded activity into an ExecutionTrace.

    Shim events are matched to MCP invocations in order; missing events
    degrade to static registration-site locations with a warning.
    """
    warnings: list[str] = []
    events = _read_new_events(attachment)
    tool_events = [e for e in events if e.get("kind") == "tool_handler"]
    resource_events = [e for e in events if e.get("kind") == "resource_handler"]

    def from_event(event: dict) -> TriggeredFunction:
        return TriggeredFunction(
            file=str(event.get("file", "<unknown>")),
            line=int(event.get("line", 0)),
            col=int(event.get("col", 0)),
            qualified_name=str(event.get("qualified_name", event.get("name", ""))),
        )

    tool_calls = []
    for i, call in enumerate(attachment._pending_tool_calls):
        if i < len(tool_events):
            triggered = [from_event(tool_events[i])]
        else:
            if attachment.mode == "shim":
                warnings.append(f"missing shim event for tool {call['name']!r}; "
                                "static location used")
            triggered = [_static_location(attachment, "tool", call["name"], warnings)]
        tool_calls.append(
            {"name": call["name"], "args": call["args"],
             "result_digest": call["result_digest"],
             "result_text": call.get("result_text", ""),
             "triggered": [t.to_dict() for t in triggered]}
        )

    resources = []
    for i, access in enumerate(attachment._pending_resources):
        if i < len(resource_events):
            triggered = [from_event(resource_events[i])]
        else:
            triggered = [_static_location(attachment, "resource", access["uri"], warnings)]
        resources.append(
            {"uri": access["uri"], "result_digest": access["result_digest"],
             "result_text": access.get("result_text", ""),
             "triggered": [t.to_dict() for t in triggered]}
        )

    trace = ExecutionTrace(
        step_index=step,
        llm_context_digest=digest(attachment._pending_context),
        tool_calls=tool_calls,
        resource_accesses=resources,
        builtin_calls=list(attachment._pending_builtins),
        warnings=warnings,
    )
    attachment._pending_context = ""
    attachment._pending_tool_calls = []
    attachment._pending_resources = []
    attachment._pending_builtins = []
    return trace


def triggered_functions(trace: ExecutionTrace) -> list[TriggeredFunction]:
    """All MCP-triggered handler locations in one trace."""
    out = []
    for call in trace.tool_calls + trace.resource_accesses:
        for raw in call.get("triggered", []):
            out.append(TriggeredFunction(**raw))
    return out
