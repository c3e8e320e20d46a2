"""Command line entry points: scan | enumerate | emit-fixtures | validate-report."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import fixtures, paths, pipeline, protocol, report as report_mod
from .config_analyzer import PatternSet
from .llm import HttpBackend, LlmUnavailable, MockBackend
from .semantics import SensitiveApiSet


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mcpvet",
                                     description="Behavioral scanner for MCP servers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_scan = sub.add_parser("scan", help="scan one or many servers")
    p_scan.add_argument("config", nargs="?", help="MCP JSON config file")
    p_scan.add_argument("--server", help="server name inside the config")
    p_scan.add_argument("--all", metavar="DIR",
                        help="scan every bundle/config directory under DIR")
    p_scan.add_argument("--llm-endpoint", help="chat-completions endpoint URL")
    p_scan.add_argument("--mock-script", help="JSON-lines mock script (hermetic runs)")
    p_scan.add_argument("--queries", type=int, default=3, help="queries per tool")
    p_scan.add_argument("--max-steps", type=int, default=8, help="steps per session")
    p_scan.add_argument("--workspace", help="root directory for session sandboxes")
    p_scan.add_argument("--patterns", help="risky-token pattern file")
    p_scan.add_argument("--sensitive-apis",
                        help="comma-separated sensitive API list files")
    p_scan.add_argument("--source", help="server source tree (defaults to workdir)")
    p_scan.add_argument("--report", help="report JSON output path")
    p_scan.add_argument("--tool", action="append", dest="tools",
                        help="restrict to these tools (repeatable)")

    p_enum = sub.add_parser("enumerate", help="print the influence-path space")
    p_enum.add_argument("--stage", choices=["LLM1", "LLM2", "LLM1+2", "none"],
                        help="filter by influenced stage")
    p_enum.add_argument("--dedup", action="store_true",
                        help="collapse TD/AS twins (16 independent paths)")
    p_enum.add_argument("--catalog", action="store_true",
                        help="print the 19-entry working catalog instead")
    p_enum.add_argument("--json", action="store_true", dest="as_json")

    p_emit = sub.add_parser("emit-fixtures", help="emit fixture server bundles")
    p_emit.add_argument("--out", required=True, help="output directory")
    p_emit.add_argument("--paths", help="comma-separated path ids (default: all 19)")
    p_emit.add_argument("--goals", help="comma-separated goals (default: all 6)")

    p_val = sub.add_parser("validate-report", help="schema-check a scan report")
    p_val.add_argument("report", help="report JSON path")

    args = parser.parse_args(argv)
    try:
        if args.command == "scan":
            return _cmd_scan(args)
        if args.command == "enumerate":
            return _cmd_enumerate(args)
        if args.command == "emit-fixtures":
            return _cmd_emit(args)
        if args.command == "validate-report":
            return _cmd_validate(args)
    except (fixtures.UnknownPath, fixtures.UnknownGoal,
            fixtures.FixtureRuntimeMissing, LlmUnavailable, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


def _backend(args):
    if args.mock_script:
        return MockBackend.from_script(args.mock_script, strict=False)
    return HttpBackend(endpoint=args.llm_endpoint)


def _cmd_scan(args) -> int:
    llm = _backend(args)
    options_kwargs = {
        "queries_per_tool": args.queries,
        "max_steps": args.max_steps,
        "workspace_root": args.workspace,
        "tool_filter": args.tools,
    }
    if args.patterns:
        options_kwargs["patterns"] = PatternSet.load(args.patterns)
    if args.sensitive_apis:
        options_kwargs["apis"] = SensitiveApiSet.load(
            *args.sensitive_apis.split(","))

    if args.all:
        return _scan_all(Path(args.all), llm, options_kwargs, args)
    if not args.config:
        print("error: provide a config file or --all DIR", file=sys.stderr)
        return 1

    spec = _pick_spec(args.config, args.server)
    options = pipeline.ScanOptions(source_root=args.source, **options_kwargs)
    result = pipeline.scan_server(spec, llm, options)
    report_path = Path(args.report or "report.json")
    report_path.write_text(json.dumps(result, indent=2), encoding="utf-8")
    code = pipeline.exit_code_for(result)
    verdict = result.get("server_verdict", {}).get("verdict", "error")
    print(f"{spec.name or spec.command}: {verdict}")
    print(f"report: {report_path}")
    return code


def _pick_spec(config_path: str, server_name: str | None) -> protocol.ServerLaunchSpec:
    specs = protocol.load_server_configs(config_path)
    if not specs:
        raise ValueError(f"{config_path}: no servers defined")
    if server_name:
        if server_name not in specs:
            raise ValueError(f"{config_path}: no server named {server_name!r}")
        spec = specs[server_name]
    elif len(specs) == 1:
        spec = next(iter(specs.values()))
    else:
        raise ValueError(
            f"{config_path}: multiple servers; pick one with --server "
            f"({', '.join(specs)})"
        )
    if spec.workdir is None:
        spec.workdir = str(Path(config_path).resolve().parent)
    return spec


def _scan_all(root: Path, llm, options_kwargs, args) -> int:
    """Bounded worker pool over server directories; per-server pipelines
    stay sequential."""
    targets = []
    for entry in sorted(root.iterdir()):
        if not entry.is_dir():
            continue
        config = entry / "mcp.json"
        manifest = entry / "manifest.json"
        if config.is_file():
            targets.append(("config", entry, config))
        elif manifest.is_file():
            targets.append(("manifest", entry, manifest))
    if not targets:
        print(f"error: no scannable directories under {root}", file=sys.stderr)
        return 1

    def scan_one(target):
        kind, entry, path = target
        if kind == "config":
            spec = _pick_spec(str(path), None)
        else:
            launch = json.loads(path.read_text(encoding="utf-8")).get("launch", {})
            spec = protocol.ServerLaunchSpec(
                command=launch.get("command", sys.executable),
                args=launch.get("args", ["server.py"]),
                env=launch.get("env", {}),
                workdir=str(entry),
                name=entry.name,
            )
        options = pipeline.ScanOptions(source_root=str(entry), **options_kwargs)
        result = pipeline.scan_server(spec, llm, options)
        out = entry / "mcpvet_report.json"
        out.write_text(json.dumps(result, indent=2), encoding="utf-8")
        return entry.name, result, out

    worst = 0
    with ThreadPoolExecutor(max_workers=4) as pool:
        for name, result, out in pool.map(scan_one, targets):
            verdict = result.get("server_verdict", {}).get("verdict", "error")
            print(f"{name}: {verdict}  ({out})")
            worst = max(worst, pipeline.exit_code_for(result))
    return worst


def _cmd_enumerate(args) -> int:
    if args.catalog:
        selected = paths.catalog()
    else:
        selected = paths.enumerate_feasible()
        if args.dedup:
            selected = paths.deduplicate(selected)
    if args.stage:
        wanted = "∅" if args.stage == "none" else args.stage
        selected = [p for p in selected if p.signature.stage.value == wanted]
    if args.as_json:
        print(json.dumps([paths.path_to_dict(p) for p in selected], indent=2,
                         ensure_ascii=False))
    else:
        for p in selected:
            pid = f"{p.id or '--':>4}"
            print(f"{pid}  [{p.signature.stage.value:>6}]  {p.render()}")
        print(f"total: {len(selected)}")
    return 0


def _cmd_emit(args) -> int:
    path_ids = args.paths.split(",") if args.paths else None
    goals = args.goals.split(",") if args.goals else None
    bundles = fixtures.emit_corpus(args.out, path_ids, goals)
    for bundle in bundles:
        print(f"{bundle.path_id} × {bundle.goal} -> {bundle.directory}")
    print(f"emitted {len(bundles)} bundles")
    return 0


def _cmd_validate(args) -> int:
    errors = report_mod.validate_report(args.report)
    if errors:
        for error in errors:
            print(f"invalid: {error}")
        return 1
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
