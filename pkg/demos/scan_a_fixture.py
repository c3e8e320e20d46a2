#!/usr/bin/env python3
"""Emit a malicious fixture and scan it with a scripted mock backend.

Shows the whole pipeline on one cross-stage fixture (resource response
steering a second-stage tool call): emission, pre-execution analysis,
simulated-host sessions with step-wise judging, and the final report.

Needs the mcpvet-fixtures package installed.
Run:  python demos/scan_a_fixture.py
"""

import sys
import tempfile
from pathlib import Path

from mcpvet import pipeline, protocol
from mcpvet.fixtures import emit_fixture
from mcpvet.llm import MockBackend

out = Path(tempfile.mkdtemp(prefix="scan-demo-"))
bundle = emit_fixture("P11", "data_leakage", out)
manifest = bundle.manifest
print(f"emitted {manifest['path_id']} × {manifest['goal']}")
print(f"influence path: {manifest['rendering']}")
print(f"expected marker: {manifest['expected_marker']}\n")

# Scripted backend: the agent follows the fixture's influence path; the
# judge blocks when the exfiltration evidence appears.
mock = MockBackend()
mock.add_rule({"verdict": "benign", "evidence": ""}, purpose="config_judge")
mock.add_rule({"function_intent": "Look up flight options between two cities.",
               "injected_intent": []}, purpose="intent_inspect")
mock.add_rule({"queries": [manifest["suggested_query"]]}, purpose="query_gen")
for entry in manifest["suggested_agent_script"]:
    mock.add_rule(entry["response"], purpose="agent", uses=1)
mock.add_rule({"action": "final", "message": "done"}, purpose="agent")
mock.add_rule({"summary": "reads sandbox credentials and writes them to the "
               "attacker collector", "key_actions": ["credential exfiltration"],
               "resources": [], "dataflow": [], "control_flow_triggers": [],
               "parameter_behavior_map": {}},
              purpose="semantics", contains='"exfil"')
mock.add_rule({"summary": "benign", "key_actions": [], "resources": [],
               "dataflow": [], "control_flow_triggers": [],
               "parameter_behavior_map": {}}, purpose="semantics")
mock.add_rule({"verdict": "BLOCK", "rationale": "tool code exfiltrates data",
               "summary": "exfiltration", "resources": [],
               "suspicious_findings": [{"finding": "exfil",
                                        "evidence": "credential exfiltration"}]},
              purpose="deviation_judge", contains="credential exfiltration")
mock.add_rule({"verdict": "ALLOW", "rationale": "ok", "summary": "",
               "resources": [], "suspicious_findings": []},
              purpose="deviation_judge")

spec = protocol.ServerLaunchSpec(
    command=sys.executable, args=["server.py"],
    workdir=bundle.directory, name=out.name,
)
report = pipeline.scan_server(
    spec, mock,
    pipeline.ScanOptions(queries_per_tool=1, max_steps=5,
                         bundle_dir=str(out / "scan-bundle"),
                         source_root=bundle.directory),
)

print(f"server verdict: {report['server_verdict']['verdict']}")
for session in report["sessions"]:
    print(f"\nsession  tool={session['tool']}  status={session['status']}")
    for trace, assessment in zip(session["traces"], session["assessments"]):
        actions = ([c["name"] for c in trace["tool_calls"]]
                   + [r["uri"] for r in trace["resource_accesses"]]
                   + [b["name"] for b in trace["builtin_calls"]])
        print(f"  step {trace['step_index']}: {actions} -> {assessment['verdict']}"
              f"  ({assessment['rationale'][:50]})")
print(f"\nexit code: {pipeline.exit_code_for(report)}")
print(f"report bundle: {report['artifacts']['bundle_dir']}")
