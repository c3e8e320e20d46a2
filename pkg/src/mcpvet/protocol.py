"""Stdio JSON-RPC client for MCP servers: spawn, discover, invoke.

Messages are newline-delimited JSON on the child's stdin/stdout (the
de-facto stdio convention). Responses are matched to requests by id, so
out-of-order replies are tolerated. One handle is confined to a single
logical scan thread; handles for distinct servers may run in parallel.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

PROTOCOL_VERSION = "2025-06-18"
HANDSHAKE_TIMEOUT = 10.0
CALL_TIMEOUT = 30.0


class SpawnFailed(Exception):
    pass


class HandshakeTimeout(Exception):
    pass


class ProtocolError(Exception):
    pass


class Timeout(Exception):
    pass


class ToolNotFound(Exception):
    pass


class ResourceNotFound(Exception):
    pass


@dataclass
class ServerLaunchSpec:
    """Launch configuration for one stdio server (command/args/env)."""

    command: str
    args: list[str] = field(default_factory=list)
    env: dict[str, str] = field(default_factory=dict)
    workdir: str | None = None
    name: str = ""

    def command_line(self) -> str:
        return " ".join([self.command, *self.args]).strip()


@dataclass
class ToolDescriptor:
    """Tool metadata exactly as presented over the wire."""

    name: str
    description: str = ""
    argument_schema: dict = field(default_factory=dict)

    def schema_text(self) -> str:
        """Pretty-printed argument schema, including field descriptions."""
        if not self.argument_schema:
            return ""
        return json.dumps(self.argument_schema, indent=2, sort_keys=True)


@dataclass
class ResourceDescriptor:
    uri: str
    name: str = ""
    description: str | None = None


@dataclass
class ToolResult:
    content: list[str]
    is_error: bool = False

    def __post_init__(self):
        if not self.content and not self.is_error:
            raise ValueError("result must carry content or be an error")

    def text(self) -> str:
        return "\n".join(self.content)


def load_server_configs(path: str | Path) -> dict[str, ServerLaunchSpec]:
    """Read the standard MCP JSON config: {"mcpServers": {name: {...}}}."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    servers = raw.get("mcpServers")
    if not isinstance(servers, dict):
        raise ValueError(f"{path}: missing mcpServers object")
    specs = {}
    for name, entry in servers.items():
        specs[name] = ServerLaunchSpec(
            command=entry.get("command", ""),
            args=list(entry.get("args", [])),
            env=dict(entry.get("env", {})),
            workdir=entry.get("cwd") or entry.get("workdir"),
            name=name,
        )
    return specs


class ServerHandle:
    """Owns one child server process and its message plumbing."""

    def __init__(self, spec: ServerLaunchSpec, process: subprocess.Popen,
                 call_timeout: float = CALL_TIMEOUT):
        self.spec = spec
        self.process = process
        self.call_timeout = call_timeout
        self.protocol_version: str | None = None
        self.server_info: dict = {}
        self._next_id = 0
        self._incoming: queue.Queue = queue.Queue()
        self._pending: dict[int, dict] = {}
        self._stderr: list[str] = []
        self._closed = False
        self._reader = threading.Thread(target=self._read_stdout, daemon=True)
        self._reader.start()
        self._errdrain = threading.Thread(target=self._read_stderr, daemon=True)
        self._errdrain.start()

    # -- wire plumbing ----------------------------------------------------

    def _read_stdout(self):
        stream = self.process.stdout
        for raw in iter(stream.readline, b""):
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                self._incoming.put({"_malformed": line})
                continue
            self._incoming.put(msg)
        self._incoming.put(None)  # EOF sentinel

    def _read_stderr(self):
        stream = self.process.stderr
        if stream is None:
            return
        for raw in iter(stream.readline, b""):
            self._stderr.append(raw.decode("utf-8", errors="replace"))

    def _send(self, msg: dict):
        if self._closed or self.process.stdin is None:
            raise ProtocolError("handle is closed")
        data = json.dumps(msg) + "\n"
        try:
            self.process.stdin.write(data.encode())
            self.process.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise ProtocolError(f"server pipe closed: {exc}") from exc

    def request(self, method: str, params: dict | None = None,
                timeout: float | None = None) -> dict:
        """Send one request and wait for the response with a matching id."""
        self._next_id += 1
        req_id = self._next_id
        msg = {"jsonrpc": "2.0", "id": req_id, "method": method}
        if params is not None:
            msg["params"] = params
        self._send(msg)
        return self._wait_for(req_id, timeout or self.call_timeout, method)

    def notify(self, method: str, params: dict | None = None):
        msg = {"jsonrpc": "2.0", "method": method}
        if params is not None:
            msg["params"] = params
        self._send(msg)

    def _wait_for(self, req_id: int, timeout: float, method: str) -> dict:
        if req_id in self._pending:
            return self._pending.pop(req_id)
        deadline = timeout
        while True:
            try:
                msg = self._incoming.get(timeout=deadline)
            except queue.Empty:
                raise Timeout(f"{method}: no response within {timeout}s")
            if msg is None:
                raise ProtocolError(f"{method}: server closed its stdout")
            if "_malformed" in msg:
                raise ProtocolError(f"{method}: unparseable line {msg['_malformed']!r}")
            msg_id = msg.get("id")
            if msg_id == req_id:
                return msg
            if msg_id is not None:
                # Out-of-order response: park it for a later waiter.
                self._pending[msg_id] = msg
            # Requests/notifications from the server are ignored.

    # -- lifecycle ---------------------------------------------------------

    def shutdown(self):
        """Reap the child; safe to call on any error path, idempotent."""
        if self._closed:
            return
        self._closed = True
        try:
            if self.process.stdin:
                self.process.stdin.close()
        except OSError:
            pass
        try:
            self.process.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.process.terminate()
            try:
                self.process.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def alive(self) -> bool:
        return not self._closed and self.process.poll() is None

    def stderr_text(self) -> str:
        return "".join(self._stderr)


def spawn_server(spec: ServerLaunchSpec, handshake_timeout: float = HANDSHAKE_TIMEOUT,
                 call_timeout: float = CALL_TIMEOUT,
                 extra_env: dict[str, str] | None = None) -> ServerHandle:
    """Start the child process and complete the initialize handshake."""
    if not spec.command:
        raise SpawnFailed("empty command")
    env = dict(os.environ)
    env.update(spec.env)
    if extra_env:
        env.update(extra_env)
    try:
        process = subprocess.Popen(
            [spec.command, *spec.args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=spec.workdir or None,
            env=env,
        )
    except (OSError, ValueError) as exc:
        raise SpawnFailed(f"{spec.command}: {exc}") from exc

    handle = ServerHandle(spec, process, call_timeout=call_timeout)
    try:
        resp = handle.request(
            "initialize",
            {
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": {"name": "mcpvet", "version": "0.1.0"},
            },
            timeout=handshake_timeout,
        )
    except Timeout as exc:
        handle.shutdown()
        raise HandshakeTimeout(str(exc)) from exc
    except ProtocolError:
        handle.shutdown()
        raise
    result = resp.get("result")
    if not isinstance(result, dict):
        handle.shutdown()
        raise ProtocolError(f"initialize returned no result: {resp}")
    # Any advertised protocol revision is accepted.
    handle.protocol_version = result.get("protocolVersion")
    handle.server_info = result.get("serverInfo", {})
    handle.notify("notifications/initialized")
    return handle


def _expect_result(resp: dict, method: str) -> dict:
    if "error" in resp:
        return resp
    result = resp.get("result")
    if not isinstance(result, dict):
        raise ProtocolError(f"{method}: malformed response {resp!r}")
    return resp


def list_tools(handle: ServerHandle) -> list[ToolDescriptor]:
    """Enumerate tools via tools/list, order preserved and unnormalized."""
    resp = _expect_result(handle.request("tools/list"), "tools/list")
    if "error" in resp:
        raise ProtocolError(f"tools/list error: {resp['error']}")
    tools_raw = resp["result"].get("tools")
    if not isinstance(tools_raw, list):
        raise ProtocolError("tools/list: result.tools missing")
    descriptors = []
    seen = set()
    for entry in tools_raw:
        name = entry.get("name", "")
        if not name:
            raise ProtocolError("tools/list: tool with empty name")
        if name in seen:
            raise ProtocolError(f"tools/list: duplicate tool name {name!r}")
        seen.add(name)
        descriptors.append(
            ToolDescriptor(
                name=name,
                description=entry.get("description", "") or "",
                argument_schema=entry.get("inputSchema", {}) or {},
            )
        )
    return descriptors


def list_resources(handle: ServerHandle) -> list[ResourceDescriptor]:
    resp = handle.request("resources/list")
    if "error" in resp:
        return []  # servers without resources may just error; treat as none
    resources = resp.get("result", {}).get("resources", [])
    out = []
    for entry in resources:
        uri = entry.get("uri", "")
        if not uri:
            raise ProtocolError("resources/list: resource with empty uri")
        out.append(
            ResourceDescriptor(
                uri=uri,
                name=entry.get("name", ""),
                description=entry.get("description"),
            )
        )
    return out


def list_prompts(handle: ServerHandle) -> None:
    """Issued for discovery completeness; results are deliberately ignored."""
    try:
        handle.request("prompts/list")
    except (ProtocolError, Timeout):
        pass


def call_tool(handle: ServerHandle, name: str, args: dict) -> ToolResult:
    resp = handle.request("tools/call", {"name": name, "arguments": args})
    if "error" in resp:
        err = resp["error"]
        message = str(err.get("message", err))
        if "not found" in message.lower() or err.get("code") == -32601:
            raise ToolNotFound(f"{name}: {message}")
        raise ProtocolError(f"tools/call {name}: {message}")
    result = resp.get("result")
    if not isinstance(result, dict):
        raise ProtocolError(f"tools/call {name}: malformed result")
    blocks = [
        block.get("text", "")
        for block in result.get("content", [])
        if isinstance(block, dict)
    ]
    is_error = bool(result.get("isError", False))
    if not blocks and not is_error:
        blocks = [""]
    return ToolResult(content=blocks, is_error=is_error)


def read_resource(handle: ServerHandle, uri: str) -> ToolResult:
    resp = handle.request("resources/read", {"uri": uri})
    if "error" in resp:
        err = resp["error"]
        message = str(err.get("message", err))
        if "not found" in message.lower() or err.get("code") in (-32601, -32002):
            raise ResourceNotFound(f"{uri}: {message}")
        raise ProtocolError(f"resources/read {uri}: {message}")
    result = resp.get("result")
    if not isinstance(result, dict):
        raise ProtocolError(f"resources/read {uri}: malformed result")
    blocks = [
        entry.get("text", "")
        for entry in result.get("contents", [])
        if isinstance(entry, dict)
    ]
    if not blocks:
        blocks = [""]
    return ToolResult(content=blocks)
