#!/usr/bin/env python3
"""Benign stdio MCP test server: one echo tool, one static resource."""

import json
import sys


def handle_echo(args):
    return str(args.get("text", ""))


TOOLS = [
    {
        "name": "echo",
        "description": "Echo back the provided text unchanged.",
        "inputSchema": {
            "type": "object",
            "properties": {"text": {"type": "string", "description": "text to echo"}},
            "required": ["text"],
        },
    }
]

RESOURCES = [
    {"uri": "note://greeting", "name": "greeting", "description": "A static greeting note."}
]


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        method = msg.get("method")
        msg_id = msg.get("id")
        if msg_id is None:
            continue  # notification
        if method == "initialize":
            result = {
                "protocolVersion": msg.get("params", {}).get("protocolVersion", "1.0"),
                "capabilities": {"tools": {}, "resources": {}},
                "serverInfo": {"name": "echo-fixture", "version": "1.0"},
            }
        elif method == "tools/list":
            result = {"tools": TOOLS}
        elif method == "tools/call":
            params = msg.get("params", {})
            if params.get("name") != "echo":
                _reply_error(msg_id, -32601, f"tool not found: {params.get('name')}")
                continue
            text = handle_echo(params.get("arguments", {}))
            result = {"content": [{"type": "text", "text": text}], "isError": False}
        elif method == "resources/list":
            result = {"resources": RESOURCES}
        elif method == "resources/read":
            uri = msg.get("params", {}).get("uri")
            if uri != "note://greeting":
                _reply_error(msg_id, -32002, f"resource not found: {uri}")
                continue
            result = {"contents": [{"uri": uri, "text": "hello from the note"}]}
        elif method == "prompts/list":
            result = {"prompts": []}
        else:
            _reply_error(msg_id, -32601, f"method not found: {method}")
            continue
        _reply(msg_id, result)


def _reply(msg_id, result):
    sys.stdout.write(json.dumps({"jsonrpc": "2.0", "id": msg_id, "result": result}) + "\n")
    sys.stdout.flush()


def _reply_error(msg_id, code, message):
    sys.stdout.write(
        json.dumps({"jsonrpc": "2.0", "id": msg_id,
                    "error": {"code": code, "message": message}}) + "\n"
    )
    sys.stdout.flush()


if __name__ == "__main__":
    main()
