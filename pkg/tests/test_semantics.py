import random
import textwrap
from collections import deque

import pytest

from mcpvet.semantics import (
    SensitiveApiSet,
    build_graph,
    extract_semantics,
    render_slice,
    slice_function,
    slice_param_forward,
    slice_return_backward,
    slice_sensitive_api,
)
from mcpvet.semantics.graph import UNKNOWN
from mcpvet.semantics.slicer import FunctionNotFound, find_sensitive_call_sites
from mcpvet.llm import MockBackend

from slice_oracle import (
    oracle_param_forward,
    oracle_return_backward,
    oracle_sensitive_api,
    random_program,
)

APIS = SensitiveApiSet.default()


def write_program(tmp_path, source: str, name: str = "prog.py"):
    target = tmp_path / name
    target.write_text(textwrap.dedent(source), encoding="utf-8")
    return tmp_path


def texts(graph, ids):
    return sorted(graph.statements[s].text for s in ids)


# -- graph construction --------------------------------------------------------


def test_two_functions_call_edge(tmp_path):
    root = write_program(tmp_path, """
        def f():
            g()

        def g():
            pass
    """)
    graph = build_graph(root)
    assert set(graph.functions) == {"prog.f", "prog.g"}
    assert graph.call_graph["prog.f"] == {"prog.g"}


def test_syntax_error_degrades(tmp_path):
    (tmp_path / "bad.py").write_text("def broken(:\n")
    (tmp_path / "good.py").write_text("def ok():\n    pass\n")
    graph = build_graph(tmp_path)
    assert "good.ok" in graph.functions
    assert any("bad.py" in w for w in graph.warnings)


def test_recursive_function_terminates(tmp_path):
    root = write_program(tmp_path, """
        def loop(n):
            x = n - 1
            return loop(x)
    """)
    graph = build_graph(root)
    assert "prog.loop" in graph.call_graph["prog.loop"]  # self edge
    fwd = slice_param_forward(graph, "prog.loop", "n")
    assert fwd  # terminates and finds dependents


def test_unknown_callee_edge(tmp_path):
    root = write_program(tmp_path, """
        def f(cb):
            cb()
            mystery_function(1)
    """)
    graph = build_graph(root)
    assert UNKNOWN in graph.call_graph["prog.f"]


def test_nested_functions_covered(tmp_path):
    root = write_program(tmp_path, """
        def outer():
            def inner():
                return 1
            return inner
    """)
    graph = build_graph(root)
    assert "prog.outer.inner" in graph.functions


def test_import_alias_normalization(tmp_path):
    root = write_program(tmp_path, """
        import subprocess as sp
        from os import system

        def f(cmd):
            sp.run(cmd)
            system(cmd)
    """)
    graph = build_graph(root)
    names = {c["full_name"] for sid in graph.functions["prog.f"].statement_ids
             for c in graph.statements[sid].calls}
    assert {"subprocess.run", "os.system"} <= names


# -- slicing spec examples ------------------------------------------------------


def test_param_forward_simple(tmp_path):
    root = write_program(tmp_path, """
        def f(p):
            x = p
            sink(x)
    """)
    graph = build_graph(root)
    result = slice_param_forward(graph, "prog.f", "p")
    assert texts(graph, result) == ["sink(x)", "x = p"]


def test_unused_parameter_empty(tmp_path):
    root = write_program(tmp_path, """
        def f(p):
            y = 1
            sink(y)
    """)
    graph = build_graph(root)
    assert slice_param_forward(graph, "prog.f", "p") == set()


def test_param_forward_into_callee(tmp_path):
    root = write_program(tmp_path, """
        def f(p):
            writer(p)

        def writer(q):
            data = q
            open("out").write(data)
    """)
    graph = build_graph(root)
    result = slice_param_forward(graph, "prog.f", "p")
    assert 'open("out").write(data)' in texts(graph, result)


def test_return_backward_simple(tmp_path):
    root = write_program(tmp_path, """
        def g():
            a = 1
            b = 2
            return a
    """)
    graph = build_graph(root)
    result = slice_return_backward(graph, "prog.g")
    assert texts(graph, result) == ["a = 1", "return a"]


def test_no_return_empty(tmp_path):
    root = write_program(tmp_path, """
        def g():
            a = 1
    """)
    graph = build_graph(root)
    assert slice_return_backward(graph, "prog.g") == set()


def test_return_through_callee(tmp_path):
    root = write_program(tmp_path, """
        def f(x):
            return g(x)

        def g(y):
            z = y * 2
            return z
    """)
    graph = build_graph(root)
    result = slice_return_backward(graph, "prog.f")
    body = texts(graph, result)
    assert "return z" in body and "z = y * 2" in body


def test_sensitive_api_with_constant(tmp_path):
    root = write_program(tmp_path, """
        import os

        def handler():
            cmd = "echo hi"
            os.system(cmd)
    """)
    graph = build_graph(root)
    result = slice_sensitive_api(graph, "prog.handler", APIS)
    assert texts(graph, result) == ['cmd = "echo hi"', "os.system(cmd)"]


def test_no_sensitive_calls_empty(tmp_path):
    root = write_program(tmp_path, """
        def pure(a):
            return a + 1
    """)
    graph = build_graph(root)
    assert slice_sensitive_api(graph, "prog.pure", APIS) == set()


def test_sensitive_call_beyond_depth_excluded(tmp_path):
    root = write_program(tmp_path, """
        import os

        def f0():
            f1()

        def f1():
            f2()

        def f2():
            f3()

        def f3():
            f4()

        def f4():
            os.system("deep")
    """)
    graph = build_graph(root)
    # the call site sits 4 call edges away from f0
    anchors = find_sensitive_call_sites(graph, "prog.f0", APIS)
    assert anchors == {}
    assert slice_sensitive_api(graph, "prog.f0", APIS) == set()
    # from f1 it is within reach
    assert find_sensitive_call_sites(graph, "prog.f1", APIS)


def test_slice_function_union_and_criteria(tmp_path):
    root = write_program(tmp_path, """
        import os

        def handler(path):
            data = read(path)
            os.system("sync")
            return data

        def read(p):
            return p
    """)
    graph = build_graph(root)
    code_slice = slice_function(graph, "prog.handler", APIS)
    union = (slice_param_forward(graph, "prog.handler", "path")
             | slice_return_backward(graph, "prog.handler")
             | slice_sensitive_api(graph, "prog.handler", APIS))
    assert code_slice.statements == union
    kinds = {c.kind for c in code_slice.criteria}
    assert kinds == {"param_forward", "return_backward", "sensitive_api_bidirectional"}


def test_slice_function_by_location(tmp_path):
    root = write_program(tmp_path, """
        def handler(x):
            return x
    """)
    graph = build_graph(root)

    class Location:
        file = str(tmp_path / "prog.py")
        line = 3  # inside handler's span
        qualified_name = ""

    code_slice = slice_function(graph, Location(), APIS)
    assert code_slice.function == "prog.handler"


def test_slice_function_not_found(tmp_path):
    (tmp_path / "prog.py").write_text("def f():\n    pass\n")
    graph = build_graph(tmp_path)

    class Location:
        file = "elsewhere.py"
        line = 1
        qualified_name = ""

    with pytest.raises(FunctionNotFound):
        slice_function(graph, Location(), APIS)


def test_delegating_handler_includes_helper(tmp_path):
    root = write_program(tmp_path, """
        def handler(arg):
            return helper(arg)

        def helper(value):
            out = value + "!"
            return out
    """)
    graph = build_graph(root)
    code_slice = slice_function(graph, "prog.handler", APIS)
    assert 'out = value + "!"' in texts(graph, code_slice.statements)


# -- oracle equivalence over randomized micro-programs -------------------------


def _assert_oracle_equivalence(graph):
    api_names = APIS.names
    for qname, info in graph.functions.items():
        for param in info.params:
            assert slice_param_forward(graph, qname, param) == \
                oracle_param_forward(graph, qname, param), (qname, param)
        assert slice_return_backward(graph, qname) == \
            oracle_return_backward(graph, qname), qname
        assert slice_sensitive_api(graph, qname, APIS) == \
            oracle_sensitive_api(graph, qname, api_names), qname


def _call_graph_distance(graph, start: str) -> dict[str, int]:
    # undirected BFS over the call graph, UNKNOWN excluded
    adjacency: dict[str, set[str]] = {}
    for src, dsts in graph.call_graph.items():
        for dst in dsts:
            if dst not in graph.functions:
                continue
            adjacency.setdefault(src, set()).add(dst)
            adjacency.setdefault(dst, set()).add(src)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for neighbour in adjacency.get(node, ()):
            if neighbour not in dist:
                dist[neighbour] = dist[node] + 1
                queue.append(neighbour)
    return dist


def test_oracle_equivalence_50_seeds(tmp_path):
    for seed in range(50):
        rng = random.Random(seed)
        source = random_program(rng)
        root = tmp_path / f"seed{seed}"
        root.mkdir()
        (root / "prog.py").write_text(source, encoding="utf-8")
        graph = build_graph(root)
        assert graph.functions, f"seed {seed} produced no functions"
        _assert_oracle_equivalence(graph)


def test_depth_bound_never_violated(tmp_path):
    for seed in range(50):
        rng = random.Random(1000 + seed)
        root = tmp_path / f"seed{seed}"
        root.mkdir()
        (root / "prog.py").write_text(random_program(rng), encoding="utf-8")
        graph = build_graph(root)
        for qname, info in graph.functions.items():
            code_slice = slice_function(graph, qname, APIS)
            dist = _call_graph_distance(graph, qname)
            for sid in code_slice.statements:
                owner = graph.statements[sid].function
                assert dist.get(owner, 99) <= 3, (seed, qname, owner)


def test_monotonicity_union_of_criteria(tmp_path):
    for seed in range(50):
        rng = random.Random(2000 + seed)
        root = tmp_path / f"seed{seed}"
        root.mkdir()
        (root / "prog.py").write_text(random_program(rng), encoding="utf-8")
        graph = build_graph(root)
        for qname, info in graph.functions.items():
            union = set()
            for param in info.params:
                union |= slice_param_forward(graph, qname, param)
            union |= slice_return_backward(graph, qname)
            union |= slice_sensitive_api(graph, qname, APIS)
            assert slice_function(graph, qname, APIS).statements == union


# -- semantic summaries ---------------------------------------------------------


def test_extract_semantics_decoded_command(tmp_path):
    root = write_program(tmp_path, """
        import base64
        import os

        def run_tool():
            payload = base64.b64decode("ZWNobyBoaQ==")
            os.system(payload)
    """)
    graph = build_graph(root)
    code_slice = slice_function(graph, "prog.run_tool", APIS)
    rendering = render_slice(graph, code_slice)
    assert "os.system(payload)" in rendering

    mock = MockBackend()
    mock.add_rule(
        {"summary": "decodes a hardcoded payload and executes it",
         "key_actions": ["command execution"],
         "resources": [{"kind": "process", "access_mode": "execute", "scope": "host"}],
         "dataflow": ["base64 constant -> os.system"],
         "control_flow_triggers": [],
         "parameter_behavior_map": {}},
        purpose="semantics", contains="os.system",
    )
    summary = extract_semantics(rendering, mock)
    assert "command execution" in summary.key_actions


def test_extract_semantics_trivial_slice():
    mock = MockBackend()
    mock.add_rule(
        {"summary": "string formatting only", "key_actions": [], "resources": [],
         "dataflow": [], "control_flow_triggers": [], "parameter_behavior_map": {}},
        purpose="semantics",
    )
    summary = extract_semantics("L1: x = f'{a}-{b}'", mock)
    assert summary.resources == []
    assert summary.dataflow == []


def test_extract_semantics_param_risk():
    mock = MockBackend()
    mock.add_rule(
        {"summary": "joins a path and writes",
         "key_actions": ["file write"],
         "resources": [{"kind": "filesystem", "access_mode": "write", "scope": "param path"}],
         "dataflow": [],
         "control_flow_triggers": [],
         "parameter_behavior_map": {"path": {"sinks": ["open"], "risk_class": "path traversal"}}},
        purpose="semantics",
    )
    summary = extract_semantics("L1: open(os.path.join(base, path), 'w')", mock)
    assert summary.parameter_behavior_map["path"]["risk_class"] == "path traversal"


def test_extract_semantics_unparseable_minimal():
    summary = extract_semantics("L1: pass", MockBackend())
    assert summary.summary == "unknown"
    assert summary.warnings
