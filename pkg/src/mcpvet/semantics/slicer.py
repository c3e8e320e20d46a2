"""Dependency slicing over the function graph.

Three criterion families per triggered function: forward from each
parameter, backward from return values, and bidirectional around sensitive
API call sites found in the function or its transitive callees. The final
slice is the union of the per-criterion closures.

Traversal semantics (shared contract with the test oracle): data and
control edges cost nothing; param/return edges cross a function boundary
and cost one. A statement is in the closure when some path from a seed
reaches it with total cost (seed depth + crossings) at most three, which
bounds every sliced statement to within three call-graph edges of the
triggered function. Synthetic parameter nodes steer the traversal but are
not reported.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .graph import UNKNOWN, FunctionGraph, FunctionInfo

DEPTH_LIMIT = 3


class ApiListLoadError(Exception):
    pass


class FunctionNotFound(Exception):
    pass


@dataclass
class SliceCriterion:
    kind: str  # param_forward | return_backward | sensitive_api_bidirectional
    anchor: str  # parameter name, "return", or anchor statement id


@dataclass
class CodeSlice:
    function: str
    statements: set[str]
    criteria: list[SliceCriterion]
    depth_limit: int = DEPTH_LIMIT
    notes: list[str] = field(default_factory=list)


@dataclass
class SensitiveApiSet:
    names: set[str]

    @classmethod
    def load(cls, *paths: str | Path) -> "SensitiveApiSet":
        names: set[str] = set()
        for path in paths:
            try:
                with open(path, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line and not line.startswith("#"):
                            names.add(line)
            except OSError as exc:
                raise ApiListLoadError(f"{path}: {exc}") from exc
        if not names:
            raise ApiListLoadError(f"no sensitive API names loaded from {paths}")
        return cls(names)

    @classmethod
    def default(cls) -> "SensitiveApiSet":
        base = resources.files("mcpvet").joinpath("data")
        with resources.as_file(base.joinpath("sensitive_apis_python.txt")) as py_path:
            with resources.as_file(base.joinpath("sensitive_apis_js.txt")) as js_path:
                return cls.load(py_path, js_path)


def _closure(graph: FunctionGraph, seeds: dict[str, int], forward: bool,
             max_depth: int = DEPTH_LIMIT) -> set[str]:
    """Min-cost reachability with 0-cost intra and 1-cost inter edges."""
    best: dict[str, int] = {}
    dq: deque = deque()
    for node, depth in seeds.items():
        if depth <= max_depth and depth < best.get(node, max_depth + 1):
            best[node] = depth
            dq.appendleft((node, depth))
    while dq:
        node, depth = dq.popleft()
        if depth > best.get(node, max_depth + 1):
            continue  # stale entry
        neighbours = graph.out_edges(node) if forward else graph.in_edges(node)
        for kind, nxt in neighbours:
            step = 1 if kind in ("param", "return") else 0
            cost = depth + step
            if cost > max_depth or cost >= best.get(nxt, max_depth + 1):
                continue
            best[nxt] = cost
            if step == 0:
                dq.appendleft((nxt, cost))
            else:
                dq.append((nxt, cost))
    return set(best)


def _real(graph: FunctionGraph, nodes: set[str]) -> set[str]:
    return {n for n in nodes if not graph.statements[n].synthetic}


def slice_param_forward(graph: FunctionGraph, f: FunctionInfo | str, param: str) -> set[str]:
    """Statements affected by one parameter's value, across call boundaries."""
    info = graph.functions[f] if isinstance(f, str) else f
    if param not in info.params:
        raise ValueError(f"{info.qualified_name} has no parameter {param!r}")
    pid = info.param_node_ids[param]
    reached = _closure(graph, {pid: 0}, forward=True)
    reached.discard(pid)
    return _real(graph, reached)


def slice_return_backward(graph: FunctionGraph, f: FunctionInfo | str) -> set[str]:
    """Statements contributing to any return value, across call boundaries."""
    info = graph.functions[f] if isinstance(f, str) else f
    if not info.return_ids:
        return set()
    seeds = {rid: 0 for rid in info.return_ids}
    return _real(graph, _closure(graph, seeds, forward=False))


def find_sensitive_call_sites(graph: FunctionGraph, f: FunctionInfo | str,
                              apis: SensitiveApiSet,
                              max_depth: int = DEPTH_LIMIT) -> dict[str, int]:
    """Anchor statements calling a sensitive API, with call-graph depth from f."""
    info = graph.functions[f] if isinstance(f, str) else f
    depths = {info.qualified_name: 0}
    frontier = deque([(info.qualified_name, 0)])
    while frontier:
        qname, depth = frontier.popleft()
        if depth >= max_depth:
            continue
        for callee in graph.call_graph.get(qname, ()):
            if callee == UNKNOWN or callee not in graph.functions:
                continue
            if callee not in depths or depth + 1 < depths[callee]:
                depths[callee] = depth + 1
                frontier.append((callee, depth + 1))
    anchors: dict[str, int] = {}
    for qname, depth in depths.items():
        for sid in graph.functions[qname].statement_ids:
            stmt = graph.statements[sid]
            for call in stmt.calls:
                if call.get("full_name") in apis.names:
                    anchors[sid] = min(depth, anchors.get(sid, max_depth + 1))
    return anchors


def slice_sensitive_api(graph: FunctionGraph, f: FunctionInfo | str,
                        apis: SensitiveApiSet) -> set[str]:
    """Bidirectional closure around each matched sensitive API call site."""
    anchors = find_sensitive_call_sites(graph, f, apis)
    if not anchors:
        return set()
    forward = _closure(graph, dict(anchors), forward=True)
    backward = _closure(graph, dict(anchors), forward=False)
    return _real(graph, forward | backward)


def resolve_triggered(graph: FunctionGraph, file: str, line: int) -> tuple[FunctionInfo, list[str]]:
    """Map a trace location to a function; nearest-enclosing as fallback."""
    notes: list[str] = []
    info = graph.function_at(file, line)
    if info is None:
        info = graph.nearest_function(file)
        if info is not None:
            notes.append(
                f"no function encloses {file}:{line}; using nearest {info.qualified_name}"
            )
    if info is None:
        raise FunctionNotFound(f"no analyzable function for {file}:{line}")
    return info, notes


def slice_function(graph: FunctionGraph, triggered, apis: SensitiveApiSet) -> CodeSlice:
    """Union of the three criterion slices for one triggered function.

    ``triggered`` needs .file and .line attributes (a TriggeredFunction)
    or may be a qualified name already present in the graph.
    """
    notes: list[str] = []
    if isinstance(triggered, str):
        if triggered not in graph.functions:
            raise FunctionNotFound(triggered)
        info = graph.functions[triggered]
    else:
        qname = getattr(triggered, "qualified_name", "")
        if qname and qname in graph.functions:
            info = graph.functions[qname]
        else:
            info, notes = resolve_triggered(graph, triggered.file, triggered.line)

    criteria: list[SliceCriterion] = []
    statements: set[str] = set()
    for param in info.params:
        criteria.append(SliceCriterion(kind="param_forward", anchor=param))
        statements |= slice_param_forward(graph, info, param)
    if info.return_ids:
        criteria.append(SliceCriterion(kind="return_backward", anchor="return"))
        statements |= slice_return_backward(graph, info)
    anchors = find_sensitive_call_sites(graph, info, apis)
    for anchor in sorted(anchors):
        criteria.append(SliceCriterion(kind="sensitive_api_bidirectional", anchor=anchor))
    statements |= slice_sensitive_api(graph, info, apis)
    return CodeSlice(function=info.qualified_name, statements=statements,
                     criteria=criteria, notes=notes)


def render_slice(graph: FunctionGraph, code_slice: CodeSlice) -> str:
    """Human/LLM-readable slice text with file:line markers, grouped per function."""
    by_function: dict[str, list] = {}
    for sid in code_slice.statements:
        stmt = graph.statements[sid]
        by_function.setdefault(stmt.function, []).append(stmt)
    lines = [f"# slice of {code_slice.function} "
             f"({len(code_slice.statements)} statements, depth<={code_slice.depth_limit})"]
    order = sorted(by_function, key=lambda q: (q != code_slice.function, q))
    for qname in order:
        info = graph.functions.get(qname)
        if info is not None:
            header = f"def {info.name}({', '.join(info.params)})"
            lines.append(f"\n# {qname}  [{Path(info.file).name}:{info.line}]")
            lines.append(header + ":")
        for stmt in sorted(by_function[qname], key=lambda s: (s.line, s.col)):
            lines.append(f"  L{stmt.line}: {stmt.text}")
    return "\n".join(lines)
