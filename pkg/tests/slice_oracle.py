"""Independent brute-force oracle for the slicing operations.

Computes dependency closures by naive fixed-point iteration over the
materialized graph edges: start from the seed depths, repeatedly relax
every known node's neighbours (intra edges keep the depth, interprocedural
edges add one), until nothing changes. Deliberately shares no traversal
code with the implementation under test.
"""

from __future__ import annotations

MAX_DEPTH = 3


def oracle_closure(graph, seeds: dict[str, int], forward: bool,
                   max_depth: int = MAX_DEPTH) -> set[str]:
    best = {n: d for n, d in seeds.items() if d <= max_depth}
    changed = True
    while changed:
        changed = False
        for node in list(best):
            depth = best[node]
            edges = graph.out_edges(node) if forward else graph.in_edges(node)
            for kind, neighbour in edges:
                cost = depth + (1 if kind in ("param", "return") else 0)
                if cost > max_depth:
                    continue
                if neighbour not in best or cost < best[neighbour]:
                    best[neighbour] = cost
                    changed = True
    return set(best)


def _strip_synthetic(graph, nodes: set[str]) -> set[str]:
    return {n for n in nodes if graph.statements[n].kind != "param"}


def oracle_param_forward(graph, qname: str, param: str) -> set[str]:
    info = graph.functions[qname]
    pid = info.param_node_ids[param]
    out = oracle_closure(graph, {pid: 0}, forward=True)
    out.discard(pid)
    return _strip_synthetic(graph, out)


def oracle_return_backward(graph, qname: str) -> set[str]:
    info = graph.functions[qname]
    if not info.return_ids:
        return set()
    seeds = {rid: 0 for rid in info.return_ids}
    return _strip_synthetic(graph, oracle_closure(graph, seeds, forward=False))


def oracle_callee_depths(graph, qname: str, max_depth: int = MAX_DEPTH) -> dict[str, int]:
    depths = {qname: 0}
    changed = True
    while changed:
        changed = False
        for fn, depth in list(depths.items()):
            if depth >= max_depth:
                continue
            for callee in graph.call_graph.get(fn, ()):
                if callee not in graph.functions:
                    continue
                if callee not in depths or depth + 1 < depths[callee]:
                    depths[callee] = depth + 1
                    changed = True
    return depths


def oracle_sensitive_api(graph, qname: str, api_names: set[str]) -> set[str]:
    depths = oracle_callee_depths(graph, qname)
    anchors: dict[str, int] = {}
    for fn, depth in depths.items():
        for sid in graph.functions[fn].statement_ids:
            for call in graph.statements[sid].calls:
                if call.get("full_name") in api_names:
                    if sid not in anchors or depth < anchors[sid]:
                        anchors[sid] = depth
    if not anchors:
        return set()
    out = oracle_closure(graph, dict(anchors), forward=True)
    out |= oracle_closure(graph, dict(anchors), forward=False)
    return _strip_synthetic(graph, out)


# -- randomized micro-program generation --------------------------------------


def random_program(rng, max_functions: int = 5, max_statements: int = 30) -> str:
    """A small random Python module: assignments, branches, calls, returns,
    and occasional sensitive API calls."""
    n_functions = rng.randint(2, max_functions)
    budget = rng.randint(10, max_statements)
    per_fn = max(2, budget // n_functions)
    lines = ["import os", "import subprocess", ""]
    for idx in range(n_functions):
        n_params = rng.randint(0, 3)
        params = [f"p{idx}_{j}" for j in range(n_params)]
        lines.append(f"def fn{idx}({', '.join(params)}):")
        body = _random_body(rng, idx, params, n_functions, per_fn)
        lines.extend("    " + b for b in body)
        lines.append("")
    return "\n".join(lines)


def _random_body(rng, fn_idx: int, params: list[str], n_functions: int,
                 n_statements: int) -> list[str]:
    available = list(params)
    body: list[str] = []
    var_counter = 0

    def fresh() -> str:
        nonlocal var_counter
        var_counter += 1
        return f"v{fn_idx}_{var_counter}"

    def operand() -> str:
        if available and rng.random() < 0.75:
            return rng.choice(available)
        return str(rng.randint(0, 9))

    for _ in range(n_statements):
        roll = rng.random()
        if roll < 0.35:
            var = fresh()
            body.append(f"{var} = {operand()} + {operand()}")
            available.append(var)
        elif roll < 0.5 and available:
            body.append(f"{rng.choice(available)} += {operand()}")
        elif roll < 0.62:
            # call another function (occasionally itself: recursion)
            target = rng.randrange(n_functions) if rng.random() < 0.15 else \
                (fn_idx + 1 + rng.randrange(max(1, n_functions - fn_idx - 1))) % n_functions
            n_args = rng.randint(0, 2)
            args = ", ".join(operand() for _ in range(n_args))
            if rng.random() < 0.5:
                var = fresh()
                body.append(f"{var} = fn{target}({args})")
                available.append(var)
            else:
                body.append(f"fn{target}({args})")
        elif roll < 0.72:
            api = rng.choice(["os.system", "subprocess.run", "open"])
            body.append(f"{api}({operand()})")
        elif roll < 0.85 and available:
            cond_var = rng.choice(available)
            var = fresh()
            body.append(f"if {cond_var} > {rng.randint(0, 5)}:")
            body.append(f"    {var} = {operand()}")
            available.append(var)
        else:
            body.append("pass")
    if rng.random() < 0.8 and available:
        body.append(f"return {rng.choice(available)}")
    if not body:
        body.append("pass")
    return body
