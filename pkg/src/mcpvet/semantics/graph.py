"""Function graph construction for Python server sources.

Produces, per source tree: the set of functions with their definition
sites, a call graph (unresolvable dynamic calls point at a distinguished
UNKNOWN node), and a per-function dependence graph over statements with
data and control edges. Interprocedural flow is materialized as explicit
edges so that slicing and its brute-force oracle traverse the exact same
structure:

- "param":  call-site statement -> synthetic parameter node of the callee
            (crossing into the callee);
- "return": return statement of the callee -> call-site statement
            (the call's value flows back out).

Approximations, chosen for dynamic code: def-use over local names in
textual order, attribute writes and container mutations define the base
name, statements in a branch/loop/except body depend on their condition
node. No aliasing, no flow-sensitivity beyond def-use ordering.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path

UNKNOWN = "UNKNOWN"

INTRA_EDGE_KINDS = ("data", "control")
INTER_EDGE_KINDS = ("param", "return")


@dataclass
class Statement:
    id: str
    function: str  # qualified name of the owning function
    kind: str      # "stmt" | "cond" | "param" | "return"
    text: str
    file: str
    line: int
    col: int
    defs: set[str] = field(default_factory=set)
    uses: set[str] = field(default_factory=set)
    calls: list[dict] = field(default_factory=list)  # {"full_name", "resolved"}

    @property
    def synthetic(self) -> bool:
        return self.kind == "param"


@dataclass
class FunctionInfo:
    qualified_name: str
    name: str
    file: str
    line: int
    col: int
    params: list[str]
    statement_ids: list[str] = field(default_factory=list)
    param_node_ids: dict[str, str] = field(default_factory=dict)
    return_ids: list[str] = field(default_factory=list)
    end_line: int = 0


@dataclass
class FunctionGraph:
    functions: dict[str, FunctionInfo] = field(default_factory=dict)
    statements: dict[str, Statement] = field(default_factory=dict)
    call_graph: dict[str, set[str]] = field(default_factory=dict)
    # node id -> list of (edge_kind, destination node id)
    edges: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    redges: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def add_edge(self, kind: str, src: str, dst: str):
        self.edges.setdefault(src, []).append((kind, dst))
        self.redges.setdefault(dst, []).append((kind, src))

    def out_edges(self, node: str) -> list[tuple[str, str]]:
        return self.edges.get(node, [])

    def in_edges(self, node: str) -> list[tuple[str, str]]:
        return self.redges.get(node, [])

    def function_at(self, file: str, line: int) -> FunctionInfo | None:
        """Function whose span encloses file:line, innermost match first."""
        best = None
        for info in self.functions.values():
            if Path(info.file).name != Path(file).name and info.file != file:
                continue
            if info.line <= line <= (info.end_line or info.line):
                if best is None or info.line >= best.line:
                    best = info
        return best

    def nearest_function(self, file: str) -> FunctionInfo | None:
        for info in self.functions.values():
            if info.file == file or Path(info.file).name == Path(file).name:
                return info
        return None


def build_graph(source_root: str | Path) -> FunctionGraph:
    """Parse every .py file under source_root into one FunctionGraph.

    Files that fail to parse are skipped with a warning; the graph is
    always returned.
    """
    source_root = Path(source_root)
    graph = FunctionGraph()
    builders: list[_ModuleBuilder] = []
    files = sorted(source_root.rglob("*.py")) if source_root.is_dir() else [source_root]
    for path in files:
        try:
            source = path.read_text(encoding="utf-8")
            tree = ast.parse(source)
        except (SyntaxError, UnicodeDecodeError, OSError) as exc:
            graph.warnings.append(f"parse error, skipped {path}: {exc}")
            continue
        builder = _ModuleBuilder(graph, path, source)
        builder.collect_functions(tree)
        builders.append(builder)
    # Second pass: with every function known, build statements and resolve calls.
    for builder in builders:
        builder.build_bodies()
    _materialize_interprocedural(graph)
    return graph


class _ModuleBuilder:
    def __init__(self, graph: FunctionGraph, path: Path, source: str):
        self.graph = graph
        self.path = path
        self.source = source
        self.module = path.stem
        self.import_aliases: dict[str, str] = {}
        self.local_functions: dict[str, str] = {}  # scope path -> qname
        self._fn_nodes: list[tuple[ast.AST, str, str | None]] = []  # (node, qname, class)

    # -- pass 1: function inventory and import aliases ---------------------

    def collect_functions(self, tree: ast.Module):
        for node in tree.body:
            if isinstance(node, (ast.Import, ast.ImportFrom)):
                self._record_import(node)
        self._walk_scope(tree.body, prefix=self.module, class_name=None)

    def _record_import(self, node):
        if isinstance(node, ast.Import):
            for alias in node.names:
                self.import_aliases[alias.asname or alias.name.split(".")[0]] = alias.name
        else:
            mod = node.module or ""
            for alias in node.names:
                local = alias.asname or alias.name
                self.import_aliases[local] = f"{mod}.{alias.name}" if mod else alias.name

    def _walk_scope(self, body, prefix: str, class_name: str | None):
        for node in body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                qname = f"{prefix}.{node.name}"
                self._register_function(node, qname)
                self._walk_scope(node.body, prefix=qname, class_name=None)
            elif isinstance(node, ast.ClassDef):
                self._walk_scope(node.body, prefix=f"{prefix}.{node.name}",
                                 class_name=node.name)
            elif hasattr(node, "body") and isinstance(getattr(node, "body"), list):
                self._walk_scope(node.body, prefix, class_name)
                for extra in ("orelse", "finalbody"):
                    if getattr(node, extra, None):
                        self._walk_scope(getattr(node, extra), prefix, class_name)
                if getattr(node, "handlers", None):
                    for handler in node.handlers:
                        self._walk_scope(handler.body, prefix, class_name)

    def _register_function(self, node, qname: str):
        params = [a.arg for a in node.args.args]
        if node.args.vararg:
            params.append(node.args.vararg.arg)
        params += [a.arg for a in node.args.kwonlyargs]
        if node.args.kwarg:
            params.append(node.args.kwarg.arg)
        info = FunctionInfo(
            qualified_name=qname,
            name=node.name,
            file=str(self.path),
            line=node.lineno,
            col=node.col_offset,
            params=params,
            end_line=getattr(node, "end_lineno", node.lineno) or node.lineno,
        )
        self.graph.functions[qname] = info
        self.graph.call_graph.setdefault(qname, set())
        self._fn_nodes.append((node, qname, None))
        # Short scope key for call resolution within this module.
        short = qname[len(self.module) + 1:]
        self.local_functions[short] = qname

    # -- pass 2: statements, def/use, intra edges, call resolution ---------

    def build_bodies(self):
        for node, qname, _ in self._fn_nodes:
            _FunctionBuilder(self, node, qname).build()

    def resolve_call(self, full_name: str | None, caller_qname: str) -> str | None:
        """Map a dotted call name to a known function, else None (UNKNOWN)."""
        if not full_name:
            return None
        parts = full_name.split(".")
        # self.method -> method of the enclosing class
        if parts[0] == "self" and len(parts) == 2:
            caller_parts = caller_qname.split(".")
            for cut in range(len(caller_parts) - 1, 0, -1):
                candidate = ".".join(caller_parts[:cut]) + "." + parts[1]
                if candidate in self.graph.functions:
                    return candidate
            return None
        # Bare name: innermost enclosing scope, then module level, then a
        # unique match anywhere in the graph.
        if len(parts) == 1:
            name = parts[0]
            caller_parts = caller_qname.split(".")
            for cut in range(len(caller_parts), 0, -1):
                candidate = ".".join(caller_parts[:cut]) + "." + name
                if candidate in self.graph.functions:
                    return candidate
            candidate = f"{self.module}.{name}"
            if candidate in self.graph.functions:
                return candidate
            matches = [q for q, i in self.graph.functions.items() if i.name == name]
            if len(matches) == 1:
                return matches[0]
            return None
        # mod.func where mod aliases another analyzed module
        head = self.import_aliases.get(parts[0], parts[0])
        candidate = head + "." + ".".join(parts[1:])
        if candidate in self.graph.functions:
            return candidate
        if full_name in self.graph.functions:
            return full_name
        return None

    def normalize_name(self, full_name: str | None) -> str | None:
        """Expand import aliases: sp.run -> subprocess.run, system -> os.system."""
        if not full_name:
            return None
        parts = full_name.split(".")
        if parts[0] in self.import_aliases:
            expanded = self.import_aliases[parts[0]]
            return ".".join([expanded, *parts[1:]])
        return full_name


class _FunctionBuilder:
    def __init__(self, module: _ModuleBuilder, node, qname: str):
        self.module = module
        self.graph = module.graph
        self.node = node
        self.qname = qname
        self.info = self.graph.functions[qname]
        self.counter = 0
        self.defs_so_far: dict[str, list[str]] = {}

    def build(self):
        for param in self.info.params:
            pid = f"{self.qname}#param:{param}"
            stmt = Statement(
                id=pid, function=self.qname, kind="param",
                text=f"param {param}", file=self.info.file,
                line=self.info.line, col=self.info.col,
                defs={param}, uses=set(),
            )
            self.graph.statements[pid] = stmt
            self.info.param_node_ids[param] = pid
            self.defs_so_far.setdefault(param, []).append(pid)
        self._emit_block(self.node.body, control_parent=None)

    def _new_id(self) -> str:
        self.counter += 1
        return f"{self.qname}#{self.counter}"

    def _segment(self, node) -> str:
        try:
            text = ast.get_source_segment(self.module.source, node)
        except Exception:
            text = None
        return " ".join((text or ast.dump(node)).split())

    def _add_statement(self, node, kind: str, text: str | None = None,
                       control_parent: str | None = None) -> Statement:
        stmt = Statement(
            id=self._new_id(), function=self.qname, kind=kind,
            text=text if text is not None else self._segment(node),
            file=self.info.file, line=node.lineno, col=node.col_offset,
        )
        self.graph.statements[stmt.id] = stmt
        self.info.statement_ids.append(stmt.id)
        if control_parent:
            self.graph.add_edge("control", control_parent, stmt.id)
        return stmt

    def _finish_statement(self, stmt: Statement, defs: set[str], uses: set[str],
                          call_nodes: list[ast.Call]):
        for use in sorted(uses):
            for def_id in self.defs_so_far.get(use, []):
                self.graph.add_edge("data", def_id, stmt.id)
        stmt.defs = defs
        stmt.uses = uses
        for call in call_nodes:
            full = _dotted_name(call.func)
            normalized = self.module.normalize_name(full)
            resolved = self.module.resolve_call(full, self.qname)
            stmt.calls.append(
                {"full_name": normalized or full, "resolved": resolved,
                 "n_args": len(call.args), "keywords": [k.arg for k in call.keywords]}
            )
            self.graph.call_graph.setdefault(self.qname, set()).add(resolved or UNKNOWN)
        for name in sorted(defs):
            self.defs_so_far.setdefault(name, []).append(stmt.id)

    def _emit_block(self, body, control_parent: str | None):
        for node in body:
            self._emit(node, control_parent)

    def _emit(self, node, control_parent: str | None):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            # Nested def: a binding statement here; its body is its own PDG.
            stmt = self._add_statement(node, "stmt", text=f"def {node.name}(...)",
                                       control_parent=control_parent)
            self._finish_statement(stmt, {node.name}, set(), [])
            return
        if isinstance(node, ast.ClassDef):
            stmt = self._add_statement(node, "stmt", text=f"class {node.name}",
                                       control_parent=control_parent)
            self._finish_statement(stmt, {node.name}, set(), [])
            return
        if isinstance(node, ast.If):
            cond = self._add_statement(node.test, "cond",
                                       text="if " + self._segment(node.test),
                                       control_parent=control_parent)
            self._finish_statement(cond, set(), _loads(node.test), _calls(node.test))
            self._emit_block(node.body, cond.id)
            self._emit_block(node.orelse, cond.id)
            return
        if isinstance(node, ast.While):
            cond = self._add_statement(node.test, "cond",
                                       text="while " + self._segment(node.test),
                                       control_parent=control_parent)
            self._finish_statement(cond, set(), _loads(node.test), _calls(node.test))
            self._emit_block(node.body, cond.id)
            self._emit_block(node.orelse, cond.id)
            return
        if isinstance(node, (ast.For, ast.AsyncFor)):
            header = self._add_statement(node, "cond",
                                         text="for " + self._segment(node.target)
                                         + " in " + self._segment(node.iter))
            if control_parent:
                self.graph.add_edge("control", control_parent, header.id)
            self._finish_statement(header, _stores(node.target), _loads(node.iter),
                                   _calls(node.iter))
            self._emit_block(node.body, header.id)
            self._emit_block(node.orelse, header.id)
            return
        if isinstance(node, (ast.With, ast.AsyncWith)):
            defs, uses, calls = set(), set(), []
            for item in node.items:
                uses |= _loads(item.context_expr)
                calls += _calls(item.context_expr)
                if item.optional_vars is not None:
                    defs |= _stores(item.optional_vars)
            header = self._add_statement(node, "stmt",
                                         text="with " + self._segment(node.items[0].context_expr),
                                         control_parent=control_parent)
            self._finish_statement(header, defs, uses, calls)
            self._emit_block(node.body, control_parent)
            return
        if isinstance(node, ast.Try):
            self._emit_block(node.body, control_parent)
            for handler in node.handlers:
                text = "except " + (self._segment(handler.type) if handler.type else "")
                cond = self._add_statement(handler, "cond", text=text.strip(),
                                           control_parent=control_parent)
                defs = {handler.name} if handler.name else set()
                uses = _loads(handler.type) if handler.type else set()
                self._finish_statement(cond, defs, uses, [])
                self._emit_block(handler.body, cond.id)
            self._emit_block(node.orelse, control_parent)
            self._emit_block(node.finalbody, control_parent)
            return

        # Simple statement.
        stmt = self._add_statement(node, "stmt", control_parent=control_parent)
        defs, uses = _defs_uses(node)
        self._finish_statement(stmt, defs, uses, _calls(node))
        if isinstance(node, ast.Return):
            stmt.kind = "return"
            self.info.return_ids.append(stmt.id)


def _dotted_name(node) -> str | None:
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        return ".".join(reversed(parts))
    return None


def _loads(node) -> set[str]:
    names = set()
    for sub in ast.walk(node):
        if isinstance(sub, ast.Name) and isinstance(sub.ctx, ast.Load):
            names.add(sub.id)
    return names


def _stores(node) -> set[str]:
    names = set()
    for sub in ast.walk(node):
        if isinstance(sub, ast.Name) and isinstance(sub.ctx, (ast.Store, ast.Del)):
            names.add(sub.id)
        elif isinstance(sub, ast.Attribute) and isinstance(sub.ctx, (ast.Store, ast.Del)):
            base = _base_name(sub)
            if base:
                names.add(base)
        elif isinstance(sub, ast.Subscript) and isinstance(sub.ctx, (ast.Store, ast.Del)):
            base = _base_name(sub)
            if base:
                names.add(base)
    return names


def _base_name(node) -> str | None:
    while isinstance(node, (ast.Attribute, ast.Subscript)):
        node = node.value
    if isinstance(node, ast.Name):
        return node.id
    return None


def _calls(node) -> list[ast.Call]:
    return [sub for sub in ast.walk(node) if isinstance(sub, ast.Call)]


def _defs_uses(node) -> tuple[set[str], set[str]]:
    defs: set[str] = set()
    uses: set[str] = set()
    if isinstance(node, ast.Assign):
        for target in node.targets:
            defs |= _stores(target)
            # a.b = x / d[k] = v also read the base object
            if isinstance(target, (ast.Attribute, ast.Subscript)):
                uses |= _loads(target)
        uses |= _loads(node.value)
    elif isinstance(node, ast.AugAssign):
        defs |= _stores(node.target)
        base = _base_name(node.target) if not isinstance(node.target, ast.Name) else node.target.id
        if base:
            uses.add(base)
        uses |= _loads(node.value)
    elif isinstance(node, ast.AnnAssign):
        defs |= _stores(node.target)
        if node.value is not None:
            uses |= _loads(node.value)
    elif isinstance(node, (ast.Import, ast.ImportFrom)):
        for alias in node.names:
            defs.add(alias.asname or alias.name.split(".")[0])
    elif isinstance(node, ast.Expr):
        uses |= _loads(node)
        # Container mutation: obj.method(...) conservatively defines obj.
        value = node.value
        if isinstance(value, ast.Call) and isinstance(value.func, ast.Attribute):
            base = _base_name(value.func)
            if base:
                defs.add(base)
    else:
        uses |= _loads(node)
    return defs, uses


def _materialize_interprocedural(graph: FunctionGraph):
    """Add param/return edges for every resolved call site."""
    for stmt in list(graph.statements.values()):
        for call in stmt.calls:
            callee_q = call.get("resolved")
            if not callee_q or callee_q not in graph.functions:
                continue
            callee = graph.functions[callee_q]
            bound = _bound_params(callee.params, call)
            for param in bound:
                pid = callee.param_node_ids.get(param)
                if pid:
                    graph.add_edge("param", stmt.id, pid)
            for ret_id in callee.return_ids:
                graph.add_edge("return", ret_id, stmt.id)


def _bound_params(params: list[str], call: dict) -> list[str]:
    n_pos = call.get("n_args", 0)
    keywords = [k for k in call.get("keywords", []) if k]
    bound = list(params[:n_pos])
    for kw in keywords:
        if kw in params and kw not in bound:
            bound.append(kw)
    # A **kwargs or *args forwarding call conservatively binds everything.
    if None in call.get("keywords", []) or n_pos > len(params):
        bound = list(params)
    return bound
