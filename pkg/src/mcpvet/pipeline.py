"""End-to-end scan orchestration in pipeline order.

Pre-execution analysis first (config judgment, then per-tool intent
inspection); a malicious config verdict aborts before the server is ever
spawned. In-execution analysis then drives generated queries through the
simulated host, one fresh sandbox and one fresh server process per
session, judging every step and stopping a server's remaining sessions at
the first BLOCK.
"""

from __future__ import annotations

import json
import tempfile
import time
from pathlib import Path

from . import protocol
from .config_analyzer import (
    PatternSet,
    analyze_config,
    extract_risky_tokens,
    tokens_to_dict,
    verdict_to_dict,
)
from .host import DEFAULT_MAX_STEPS, SessionConfig, SinkRecorder, run_session, seed_workspace
from .intent import inspect_tool, report_to_dict
from .judger import DeviationJudger, aggregate_verdict
from .llm import LlmBackend
from .queries import DEFAULT_QUERY_COUNT, generate_queries
from .semantics import (
    SensitiveApiSet,
    build_graph,
    extract_semantics,
    render_slice,
    slice_function,
)
from .semantics.slicer import FunctionNotFound
from .tracer import instrument, triggered_functions

REPORT_VERSION = 1

# Decoy files planted in every session workspace; fixture bundles may add
# their own via manifest.json sandbox_seed entries.
DEFAULT_SANDBOX_SEED = [
    {"path": "credentials.txt", "contents": "PLANTED-CRED-a8f3e2d1\n"},
    {"path": ".ssh/authorized_keys", "contents": "ssh-ed25519 AAAA-decoy scanner@sandbox\n"},
    {"path": "wallet.dat", "contents": "DECOY-WALLET-00\n"},
    {"path": "documents/report.txt", "contents": "quarterly numbers (decoy)\n"},
]


class ScanOptions:
    def __init__(self, queries_per_tool: int = DEFAULT_QUERY_COUNT,
                 max_steps: int = DEFAULT_MAX_STEPS,
                 workspace_root: str | None = None,
                 patterns: PatternSet | None = None,
                 apis: SensitiveApiSet | None = None,
                 source_root: str | None = None,
                 bundle_dir: str | None = None,
                 tool_filter: list[str] | None = None):
        self.queries_per_tool = queries_per_tool
        self.max_steps = max_steps
        self.workspace_root = workspace_root
        self.patterns = patterns
        self.apis = apis
        self.source_root = source_root
        self.bundle_dir = bundle_dir
        self.tool_filter = tool_filter


def _load_fixture_manifest(source_root: Path) -> dict:
    manifest = source_root / "manifest.json"
    if manifest.is_file():
        try:
            return json.loads(manifest.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            return {}
    return {}


class _SemanticsCache:
    """Slice + summarize each triggered handler once per scan."""

    def __init__(self, graph, apis, llm, bundle_dir: Path):
        self.graph = graph
        self.apis = apis
        self.llm = llm
        self.bundle_dir = bundle_dir
        self.cache: dict[str, object] = {}
        self.renderings: dict[str, str] = {}

    def for_trace(self, trace) -> list:
        summaries = []
        for tf in triggered_functions(trace):
            key = tf.qualified_name or f"{tf.file}:{tf.line}"
            if key not in self.cache:
                self.cache[key] = self._analyze(tf, key)
            if self.cache[key] is not None:
                summaries.append(self.cache[key])
        return summaries

    def _analyze(self, tf, key: str):
        try:
            code_slice = slice_function(self.graph, tf, self.apis)
        except FunctionNotFound:
            return None
        rendering = render_slice(self.graph, code_slice)
        self.renderings[key] = rendering
        slices_dir = self.bundle_dir / "slices"
        slices_dir.mkdir(parents=True, exist_ok=True)
        safe = key.replace("/", "_").replace(":", "_")
        (slices_dir / f"{safe}.txt").write_text(rendering, encoding="utf-8")
        return extract_semantics(rendering, self.llm)


def scan_server(spec: protocol.ServerLaunchSpec, llm: LlmBackend,
                options: ScanOptions | None = None,
                agent_llm: LlmBackend | None = None) -> dict:
    """Scan one server and return the report dict (see report module)."""
    options = options or ScanOptions()
    agent_llm = agent_llm or llm
    started = time.time()
    stages: dict[str, float] = {}

    bundle_dir = Path(options.bundle_dir or tempfile.mkdtemp(prefix="mcpvet-bundle-"))
    bundle_dir.mkdir(parents=True, exist_ok=True)
    sink = SinkRecorder(bundle_dir / "sink.jsonl")

    source_root = Path(options.source_root or spec.workdir or ".")
    manifest = _load_fixture_manifest(source_root)
    sandbox_seed = DEFAULT_SANDBOX_SEED + list(manifest.get("sandbox_seed", []))
    web_corpus = dict(manifest.get("web_corpus", {}))

    report: dict = {
        "report_version": REPORT_VERSION,
        "server": {
            "name": spec.name or source_root.name,
            "command": spec.command,
            "args": list(spec.args),
            "env": dict(spec.env),
            "workdir": spec.workdir,
            "source_root": str(source_root),
        },
        "tools": [],
        "sessions": [],
        "artifacts": {
            "bundle_dir": str(bundle_dir),
            "sink_log": str(bundle_dir / "sink.jsonl"),
            "llm_transcript": str(bundle_dir / "llm_transcript.jsonl"),
            "side_channel_env": "MCPVET_TRACE_FILE",
        },
    }

    # -- pre-execution: config gate ----------------------------------------
    t = time.time()
    patterns = options.patterns or PatternSet.default()
    config_verdict = analyze_config(spec, llm, patterns)
    report["config_verdict"] = verdict_to_dict(config_verdict)
    report["risky_tokens"] = tokens_to_dict(
        extract_risky_tokens(spec.command_line(), patterns)
    )
    stages["config_analysis"] = time.time() - t

    if config_verdict.verdict == "malicious":
        # Abort before spawning anything.
        verdict = aggregate_verdict(config_verdict, [])
        report["server_verdict"] = verdict.to_dict()
        _finish(report, llm, agent_llm, bundle_dir, started, stages)
        return report

    # -- discovery + intent -------------------------------------------------
    t = time.time()
    attachment = instrument(spec, source_root, workdir=bundle_dir / "tracer")
    sandbox_env_base = {"MCPVET_SINK_LOG": str(bundle_dir / "sink.jsonl")}
    try:
        handle = protocol.spawn_server(
            spec, extra_env={**attachment.extra_env(), **sandbox_env_base}
        )
    except (protocol.SpawnFailed, protocol.HandshakeTimeout, protocol.ProtocolError) as exc:
        report["error"] = f"spawn failed: {exc}"
        verdict = aggregate_verdict(config_verdict, [])
        report["server_verdict"] = verdict.to_dict()
        _finish(report, llm, agent_llm, bundle_dir, started, stages)
        return report

    try:
        tools = protocol.list_tools(handle)
        resources = protocol.list_resources(handle)
        protocol.list_prompts(handle)  # results deliberately ignored
    except (protocol.ProtocolError, protocol.Timeout) as exc:
        handle.shutdown()
        report["error"] = f"discovery failed: {exc}"
        verdict = aggregate_verdict(config_verdict, [])
        report["server_verdict"] = verdict.to_dict()
        _finish(report, llm, agent_llm, bundle_dir, started, stages)
        return report
    handle.shutdown()

    intents = {}
    for td in tools:
        intent_report = inspect_tool(td, llm)
        intents[td.name] = intent_report
        report["tools"].append(
            {
                "name": td.name,
                "description": td.description,
                "argument_schema": td.argument_schema,
                "intent_report": report_to_dict(intent_report),
            }
        )
    stages["intent_inspection"] = time.time() - t

    # -- in-execution -------------------------------------------------------
    t = time.time()
    graph = build_graph(source_root)
    apis = options.apis or SensitiveApiSet.default()
    semantics = _SemanticsCache(graph, apis, llm, bundle_dir)
    stages["graph_build"] = time.time() - t

    t = time.time()
    sessions = []
    blocked = False
    for td in tools:
        if blocked:
            break
        if options.tool_filter and td.name not in options.tool_filter:
            continue
        intent_report = intents[td.name]
        baseline = intent_report.function_intent or td.description or td.name
        qs = generate_queries(td.name, baseline, options.queries_per_tool, llm)
        for query in qs.queries:
            workspace = Path(
                tempfile.mkdtemp(prefix="session-",
                                 dir=options.workspace_root or str(bundle_dir))
            )
            seed_workspace(workspace, sandbox_seed)
            session_env = {
                **attachment.extra_env(),
                "MCPVET_SANDBOX": str(workspace),
                "MCPVET_SINK_LOG": str(bundle_dir / "sink.jsonl"),
            }
            try:
                handle = protocol.spawn_server(spec, extra_env=session_env)
            except (protocol.SpawnFailed, protocol.HandshakeTimeout,
                    protocol.ProtocolError) as exc:
                report.setdefault("warnings", []).append(f"session spawn failed: {exc}")
                continue
            judger = DeviationJudger(baseline, llm, semantics_for=semantics.for_trace)
            cfg = SessionConfig(
                max_steps=options.max_steps, workspace=str(workspace),
                query=query, tool_under_test=td.name,
                tools=tools, resources=resources, web_corpus=web_corpus,
            )
            try:
                outcome = run_session(cfg, handle, agent_llm, judger, attachment,
                                      sink=sink)
            finally:
                handle.shutdown()
            sessions.append(outcome)
            report["sessions"].append(_session_to_dict(outcome))
            if outcome.status == "blocked":
                blocked = True  # remaining sessions for this server are skipped
                break
    stages["sessions"] = time.time() - t

    verdict = aggregate_verdict(config_verdict, sessions)
    report["server_verdict"] = verdict.to_dict()
    report["artifacts"]["trace_mode"] = attachment.mode
    _finish(report, llm, agent_llm, bundle_dir, started, stages)
    return report


def _session_to_dict(outcome) -> dict:
    return {
        "tool": outcome.tool_under_test,
        "query": outcome.query,
        "status": outcome.status,
        "traces": [tr.to_dict() for tr in outcome.traces],
        "assessments": [a.to_dict() for a in outcome.assessments],
        "violations": outcome.violations,
        "final_message": outcome.final_message,
    }


def _finish(report: dict, llm: LlmBackend, agent_llm: LlmBackend,
            bundle_dir: Path, started: float, stages: dict):
    transcript_path = bundle_dir / "llm_transcript.jsonl"
    with open(transcript_path, "w", encoding="utf-8") as fh:
        for entry in llm.transcript:
            fh.write(json.dumps(entry) + "\n")
        if agent_llm is not llm:
            for entry in agent_llm.transcript:
                fh.write(json.dumps(entry) + "\n")
    finished = time.time()
    report["timing"] = {
        "started": started,
        "finished": finished,
        "seconds": round(finished - started, 3),
        "stages": {k: round(v, 3) for k, v in stages.items()},
    }


def exit_code_for(report: dict) -> int:
    verdict = report.get("server_verdict", {}).get("verdict")
    if report.get("error"):
        return 1
    return {"benign": 0, "suspicious": 2, "malicious": 3}.get(verdict, 1)
