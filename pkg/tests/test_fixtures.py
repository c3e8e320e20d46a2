import json
from pathlib import Path

import pytest

from mcpvet.fixtures import GOALS, UnknownGoal, UnknownPath, check_marker, emit_fixture
from mcpvet.paths import compatible_techniques, component_group

# Emission needs the fixture runtime package; these tests exercise the
# primary-side contract when it is installed.
pytest.importorskip("mcpvet_fixtures")


def test_emit_fixture_writes_bundle(tmp_path):
    bundle = emit_fixture("P1", "data_leakage", tmp_path)
    root = Path(bundle.directory)
    assert (root / "server.py").is_file()
    assert (root / "mcplite.py").is_file()
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["path_id"] == "P1"
    assert manifest["goal"] == "data_leakage"
    assert manifest["rendering"] == "A_TD → LLM1 →arg Builtin"


def test_emit_fixture_labels_compatible(tmp_path):
    for path_id in ("P3", "P6", "P17", "P19"):
        bundle = emit_fixture(path_id, "sabotaging", tmp_path)
        for component, techniques in bundle.manifest["technique_labels"].items():
            assert set(techniques) <= compatible_techniques(component_group(component))


def test_emit_fixture_unknown_inputs(tmp_path):
    with pytest.raises(UnknownPath):
        emit_fixture("P0", "sabotaging", tmp_path)
    with pytest.raises(UnknownGoal):
        emit_fixture("P1", "mischief", tmp_path)


def test_marker_kinds_are_sandbox_observable(tmp_path):
    allowed = {"sink_log_contains", "file_exists", "file_absent",
               "file_contains", "file_suffix_present"}
    for goal in GOALS:
        bundle = emit_fixture("P17", goal, tmp_path / goal)
        assert bundle.manifest["expected_marker"]["kind"] in allowed


def test_check_marker_kinds(tmp_path):
    ws = tmp_path / "ws"
    ws.mkdir()
    sink = tmp_path / "sink.jsonl"
    sink.write_text('{"kind": "exfil", "data": "PLANTED-CRED-x"}\n')
    assert check_marker({"expected_marker": {"kind": "sink_log_contains",
                                             "needle": "PLANTED-CRED"}}, ws, sink)
    (ws / "m.marker").write_text("")
    assert check_marker({"expected_marker": {"kind": "file_exists",
                                             "path": "m.marker"}}, ws, sink)
    assert check_marker({"expected_marker": {"kind": "file_absent",
                                             "path": "gone.txt"}}, ws, sink)
