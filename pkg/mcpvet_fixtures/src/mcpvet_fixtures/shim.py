"""Handler-entry tracing shim, activated at interpreter startup.

When MCPVET_TRACE_FILE names a side-channel file, an import hook wraps
mcplite's registration points so every tool/resource handler invocation
appends one JSON event line carrying the handler's definition site
⟨file, line, col⟩. Without the environment variable activation is a
silent no-op, and wrapping never changes handler results.

Event format (version 1), one JSON object per line:
{"v": 1, "ts": ..., "kind": "tool_handler"|"resource_handler",
 "name": ..., "qualified_name": ..., "file": ..., "line": ..., "col": ...,
 "call_args_digest": ...}
"""

import ast
import functools
import hashlib
import importlib.abc
import importlib.machinery
import importlib.util
import json
import os
import sys
import time

TRACE_FILE_ENV = "MCPVET_TRACE_FILE"
EVENT_VERSION = 1

_installed = False
_col_cache = {}


def activate():
    """Install the mcplite import hook; no-op when the env var is absent
    or activation already happened (idempotent)."""
    global _installed
    if _installed or not os.environ.get(TRACE_FILE_ENV):
        return
    if "mcplite" in sys.modules:
        _patch_module(sys.modules["mcplite"])
    else:
        sys.meta_path.insert(0, _McpliteFinder())
    _installed = True


class _McpliteFinder(importlib.abc.MetaPathFinder):
    _busy = False

    def find_spec(self, fullname, path=None, target=None):
        if fullname != "mcplite" or _McpliteFinder._busy:
            return None
        _McpliteFinder._busy = True
        try:
            spec = importlib.util.find_spec(fullname)
        finally:
            _McpliteFinder._busy = False
        if spec is None or spec.loader is None:
            return None
        spec.loader = _WrappingLoader(spec.loader)
        return spec


class _WrappingLoader(importlib.abc.Loader):
    def __init__(self, inner):
        self._inner = inner

    def create_module(self, spec):
        return self._inner.create_module(spec)

    def exec_module(self, module):
        self._inner.exec_module(module)
        _patch_module(module)


def _patch_module(mcplite):
    server_cls = getattr(mcplite, "Server", None)
    if server_cls is None or getattr(server_cls, "_mcpvet_shimmed", False):
        return
    original_tool = server_cls.register_tool
    original_resource = server_cls.register_resource

    def register_tool(self, name, description, schema, handler):
        original_tool(self, name, description, schema,
                      _wrap(handler, "tool_handler", name))

    def register_resource(self, uri, name, description, handler):
        original_resource(self, uri, name, description,
                          _wrap(handler, "resource_handler", uri))

    server_cls.register_tool = register_tool
    server_cls.register_resource = register_resource
    server_cls._mcpvet_shimmed = True


def _wrap(handler, kind, registered_name):
    site = _definition_site(handler)

    @functools.wraps(handler)
    def traced(*args, **kwargs):
        _emit(kind, registered_name, handler, site, args, kwargs)
        return handler(*args, **kwargs)

    return traced


def _definition_site(handler):
    code = getattr(handler, "__code__", None)
    if code is None:
        return {"file": "<builtin>", "line": 0, "col": 0}
    filename = code.co_filename
    # co_firstlineno points at the first decorator for decorated functions;
    # normalize to the def line, which is the definition site proper.
    line, col = _def_position(filename, code.co_firstlineno)
    return {"file": filename, "line": line, "col": col}


def _def_position(filename, firstlineno):
    key = (filename, firstlineno)
    if key in _col_cache:
        return _col_cache[key]
    line, col = firstlineno, 0
    try:
        tree = ast.parse(open(filename, encoding="utf-8").read())
        for node in ast.walk(tree):
            if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                continue
            decorator_lines = [d.lineno for d in node.decorator_list]
            if node.lineno == firstlineno or firstlineno in decorator_lines:
                line, col = node.lineno, node.col_offset
                break
    except (OSError, SyntaxError):
        pass
    _col_cache[key] = (line, col)
    return line, col


def _emit(kind, registered_name, handler, site, args, kwargs):
    path = os.environ.get(TRACE_FILE_ENV)
    if not path:
        return
    try:
        payload = json.dumps({"args": repr(args), "kwargs": repr(kwargs)})
        event = {
            "v": EVENT_VERSION,
            "ts": time.time(),
            "kind": kind,
            "name": registered_name,
            "qualified_name": _qualified_name(handler),
            "file": site["file"],
            "line": site["line"],
            "col": site["col"],
            "call_args_digest": hashlib.sha256(payload.encode()).hexdigest()[:12],
        }
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
    except OSError:
        pass  # tracing must never break the server


def _qualified_name(handler):
    module = getattr(handler, "__module__", "") or ""
    qualname = getattr(handler, "__qualname__", getattr(handler, "__name__", "?"))
    if module in ("__main__", ""):
        code = getattr(handler, "__code__", None)
        if code is not None:
            module = os.path.splitext(os.path.basename(code.co_filename))[0]
    return f"{module}.{qualname}" if module else qualname
