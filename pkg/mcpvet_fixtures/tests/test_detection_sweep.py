"""Mock-driven detection sweep: 20 malicious fixtures spanning all four
stage classes plus the configuration path, against 5 benign controls.

Every fixture whose scripted transcript walks its marker path must be
classified malicious; the benign control set must produce zero malicious
verdicts. Runs entirely on the scripted mock backend, no network.
"""

import json
import sys
import time
from pathlib import Path

import pytest

from mcpvet import pipeline, protocol
from mcpvet.llm import MockBackend
from mcpvet_fixtures.benign import emit_benign

from fixture_support import bundle_spec

# (path, goal) sample: 6 first-stage, 4 second-stage, 6 cross-stage,
# 3 direct (P17 twice, P18), 1 configuration = 20.
SWEEP_SAMPLE = [
    ("P1", "data_leakage"),
    ("P2", "reverse_shell"),
    ("P3", "download_execute"),
    ("P4", "backdoor"),
    ("P5", "sabotaging"),
    ("P6", "ransomware"),
    ("P7", "data_leakage"),
    ("P8", "sabotaging"),
    ("P9", "ransomware"),
    ("P10", "backdoor"),
    ("P11", "data_leakage"),
    ("P12", "reverse_shell"),
    ("P13", "sabotaging"),
    ("P14", "download_execute"),
    ("P15", "backdoor"),
    ("P16", "ransomware"),
    ("P17", "sabotaging"),
    ("P17", "ransomware"),
    ("P18", "data_leakage"),
    ("P19", "reverse_shell"),
]

SEMANTIC_FLAGS = [
    # (slice text key, flagged key action)
    ('"exfil"', "credential exfiltration to attacker collector"),
    ("reverse-shell-intent", "reverse shell contact"),
    ("payload_stub", "downloads and executes remote payload"),
    ("os.rename", "renames user documents with enc-marker suffix"),
    ("os.remove", "deletes user data files"),
    ("authorized_keys", "plants unauthorized ssh key"),
]

BLOCK_KEYS = [
    ["attacker.test"],
    ["sh payload.sh"],
    [".enc-marker"],
    ["file_delete", "important_data.txt"],
    ["authorized_keys", "file_write"],
] + [[flag] for _, flag in SEMANTIC_FLAGS]


def build_sweep_mock(manifest: dict) -> MockBackend:
    mock = MockBackend()
    # config judging: flag the known malicious launch chains
    for needle in ("/dev/tcp", "| sh", "rm -rf", "authorized_keys", "do mv",
                   "--data @credentials"):
        mock.add_rule({"verdict": "malicious",
                       "evidence": f"launch chain contains {needle!r}"},
                      purpose="config_judge", contains=needle)
    mock.add_rule({"verdict": "benign", "evidence": "install/start only"},
                  purpose="config_judge")
    mock.add_rule({"function_intent": "declared travel/utility capability",
                   "injected_intent": []}, purpose="intent_inspect")
    mock.add_rule({"queries": [manifest.get("suggested_query", "Use the tool.")]},
                  purpose="query_gen")
    for entry in manifest.get("suggested_agent_script", []):
        mock.add_rule(entry["response"], purpose="agent", uses=1)
    mock.add_rule({"action": "final", "message": "done"}, purpose="agent")
    for key, flag in SEMANTIC_FLAGS:
        mock.add_rule({"summary": flag, "key_actions": [flag], "resources": [],
                       "dataflow": [], "control_flow_triggers": [],
                       "parameter_behavior_map": {}},
                      purpose="semantics", contains=key)
    mock.add_rule({"summary": "benign helper logic", "key_actions": [],
                   "resources": [], "dataflow": [], "control_flow_triggers": [],
                   "parameter_behavior_map": {}}, purpose="semantics")
    for keys in BLOCK_KEYS:
        mock.add_rule({"verdict": "BLOCK",
                       "rationale": f"evidence matches {keys}",
                       "summary": "malicious deviation",
                       "resources": [],
                       "suspicious_findings": [{"finding": "deviation",
                                                "evidence": str(keys)}]},
                      purpose="deviation_judge", contains=keys)
    mock.add_rule({"verdict": "ALLOW", "rationale": "consistent with intent",
                   "summary": "ok", "resources": [], "suspicious_findings": []},
                  purpose="deviation_judge")
    return mock


def scan_bundle(bundle: Path, tmp_path: Path) -> dict:
    manifest = json.loads((bundle / "manifest.json").read_text())
    launch = manifest["launch"]
    if launch["command"] == "python3":
        spec = bundle_spec(bundle)
    else:  # P19-style: the malicious chain itself, never actually spawned
        spec = protocol.ServerLaunchSpec(
            command=launch["command"], args=launch["args"],
            env=launch.get("env", {}), workdir=str(bundle), name=bundle.name,
        )
    options = pipeline.ScanOptions(
        queries_per_tool=1, max_steps=6,
        bundle_dir=str(tmp_path / f"scan-{bundle.name}"),
        source_root=str(bundle),
    )
    return pipeline.scan_server(spec, build_sweep_mock(manifest), options)


@pytest.mark.parametrize("path_id,goal", SWEEP_SAMPLE)
def test_sweep_fixture_classified_malicious(path_id, goal, corpus_dir, tmp_path):
    report = scan_bundle(corpus_dir / f"{path_id}_{goal}", tmp_path)
    assert report["server_verdict"]["verdict"] == "malicious", (
        path_id, goal, report["server_verdict"])
    if path_id == "P19":
        assert report["sessions"] == []  # judged from config, never spawned


def test_benign_controls_zero_malicious(tmp_path):
    started = time.time()
    bundles = emit_benign(tmp_path / "benign")
    assert len(bundles) == 5
    verdicts = {}
    for bundle in bundles:
        report = scan_bundle(bundle, tmp_path)
        verdicts[bundle.name] = report["server_verdict"]["verdict"]
    assert all(v != "malicious" for v in verdicts.values()), verdicts
    assert all(v == "benign" for v in verdicts.values()), verdicts
    assert time.time() - started < 600


def test_cli_scan_all_over_benign_bundles(tmp_path, capsys):
    """The --all entry point walks bundle directories via their manifests."""
    from mcpvet import cli

    root = tmp_path / "marketplace"
    emit_benign(root)
    rules = []
    for bundle in sorted(root.iterdir()):
        manifest = json.loads((bundle / "manifest.json").read_text())
        for entry in manifest["suggested_agent_script"]:
            rules.append({"purpose": "agent", "uses": 1, "response": entry["response"]})
    rules += [
        {"purpose": "config_judge", "response": {"verdict": "benign", "evidence": ""}},
        {"purpose": "intent_inspect",
         "response": {"function_intent": "declared capability", "injected_intent": []}},
        {"purpose": "query_gen", "response": {"queries": ["use the tool"]}},
        {"purpose": "agent", "response": {"action": "final", "message": "done"}},
        {"purpose": "semantics",
         "response": {"summary": "benign", "key_actions": [], "resources": [],
                      "dataflow": [], "control_flow_triggers": [],
                      "parameter_behavior_map": {}}},
        {"purpose": "deviation_judge",
         "response": {"verdict": "ALLOW", "rationale": "ok", "summary": "",
                      "resources": [], "suspicious_findings": []}},
    ]
    script = tmp_path / "mock.jsonl"
    script.write_text("\n".join(json.dumps(r) for r in rules))
    code = cli.main(["scan", "--all", str(root), "--mock-script", str(script),
                     "--queries", "1", "--max-steps", "3"])
    out = capsys.readouterr().out
    assert code == 0, out
    assert out.count(": benign") == 5  # one verdict line per server
    for bundle in root.iterdir():
        assert (bundle / "mcpvet_report.json").exists()
