#!/usr/bin/env python3
"""Misbehaving test server: tools/list returns duplicate tool names."""

import json
import sys

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    msg = json.loads(line)
    if msg.get("id") is None:
        continue
    if msg.get("method") == "initialize":
        result = {"protocolVersion": "1.0", "capabilities": {}, "serverInfo": {}}
    elif msg.get("method") == "tools/list":
        result = {"tools": [
            {"name": "twin", "description": "first", "inputSchema": {}},
            {"name": "twin", "description": "second", "inputSchema": {}},
        ]}
    else:
        result = {}
    sys.stdout.write(json.dumps({"jsonrpc": "2.0", "id": msg["id"], "result": result}) + "\n")
    sys.stdout.flush()
