"""mcplite: a minimal stdio MCP server framework for fixture servers.

This module is copied verbatim into every emitted fixture bundle as
mcplite.py, so bundles run standalone with only the standard library.
Registration goes through register_tool/register_resource (the decorator
forms call into them), giving the tracing shim a single interception
point.
"""

import json
import sys


class Server:
    def __init__(self, name, version="1.0"):
        self.name = name
        self.version = version
        self._tools = {}       # name -> {"description", "schema", "handler"}
        self._resources = {}   # uri -> {"name", "description", "handler"}

    # -- registration -------------------------------------------------------

    def register_tool(self, name, description, schema, handler):
        self._tools[name] = {
            "description": description,
            "schema": schema or {"type": "object", "properties": {}},
            "handler": handler,
        }

    def register_resource(self, uri, name, description, handler):
        self._resources[uri] = {
            "name": name,
            "description": description,
            "handler": handler,
        }

    def tool(self, name=None, description="", schema=None):
        def decorator(fn):
            self.register_tool(
                name or fn.__name__,
                description or (fn.__doc__ or "").strip(),
                schema,
                fn,
            )
            return fn
        return decorator

    def resource(self, uri, name="", description=""):
        def decorator(fn):
            self.register_resource(
                uri,
                name or fn.__name__,
                description or (fn.__doc__ or "").strip(),
                fn,
            )
            return fn
        return decorator

    # -- protocol loop ------------------------------------------------------

    def run(self):
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except ValueError:
                continue
            msg_id = msg.get("id")
            if msg_id is None:
                continue  # notification
            try:
                result = self._dispatch(msg)
            except _RequestError as exc:
                self._send({"jsonrpc": "2.0", "id": msg_id,
                            "error": {"code": exc.code, "message": str(exc)}})
                continue
            except Exception as exc:  # handler crash -> tool error result
                result = {"content": [{"type": "text", "text": f"error: {exc}"}],
                          "isError": True}
            self._send({"jsonrpc": "2.0", "id": msg_id, "result": result})

    def _dispatch(self, msg):
        method = msg.get("method")
        params = msg.get("params") or {}
        if method == "initialize":
            return {
                "protocolVersion": params.get("protocolVersion", "1.0"),
                "capabilities": {"tools": {}, "resources": {}},
                "serverInfo": {"name": self.name, "version": self.version},
            }
        if method == "tools/list":
            return {"tools": [
                {"name": name, "description": entry["description"],
                 "inputSchema": entry["schema"]}
                for name, entry in self._tools.items()
            ]}
        if method == "tools/call":
            name = params.get("name")
            if name not in self._tools:
                raise _RequestError(-32601, f"tool not found: {name}")
            out = self._tools[name]["handler"](params.get("arguments") or {})
            return _tool_result(out)
        if method == "resources/list":
            return {"resources": [
                {"uri": uri, "name": entry["name"], "description": entry["description"]}
                for uri, entry in self._resources.items()
            ]}
        if method == "resources/read":
            uri = params.get("uri")
            if uri not in self._resources:
                raise _RequestError(-32002, f"resource not found: {uri}")
            text = self._resources[uri]["handler"]()
            return {"contents": [{"uri": uri, "text": str(text)}]}
        if method == "prompts/list":
            return {"prompts": []}
        raise _RequestError(-32601, f"method not found: {method}")

    @staticmethod
    def _send(obj):
        sys.stdout.write(json.dumps(obj) + "\n")
        sys.stdout.flush()


class _RequestError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _tool_result(out):
    if isinstance(out, dict) and "content" in out:
        return out
    return {"content": [{"type": "text", "text": str(out)}], "isError": False}
