"""Fixture-server bundle emission: one runnable server per path × goal.

The influence-path catalog times six attack goals yields the 114-bundle
corpus. Server sources come from the fixture runtime package's templates
(installed separately); this module owns the (path, goal) space, manifest
composition, and the compatibility validation of technique labels against
the component matrix. Payloads are safe sandbox markers, never real
exploits: every expected marker is a workspace file effect or a sink-log
entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .paths import catalog_by_id, compatible_techniques, component_group

GOALS = (
    "data_leakage",
    "reverse_shell",
    "download_execute",
    "ransomware",
    "sabotaging",
    "backdoor",
)

MANIFEST_VERSION = 1


class UnknownPath(Exception):
    pass


class UnknownGoal(Exception):
    pass


class FixtureRuntimeMissing(Exception):
    pass


@dataclass
class FixtureBundle:
    path_id: str
    goal: str
    directory: str
    manifest: dict


def _templates():
    try:
        from mcpvet_fixtures import templates
    except ImportError as exc:
        raise FixtureRuntimeMissing(
            "fixture emission needs the mcpvet-fixtures package installed"
        ) from exc
    return templates


def emit_fixture(path_id: str, goal: str, out_dir: str | Path) -> FixtureBundle:
    """Write one runnable fixture bundle under out_dir.

    The bundle directory holds server.py (plus its local mcplite module),
    any payload stubs, and manifest.json describing injection locations,
    technique labels, sandbox seeds, and the expected sandbox-observable
    marker.
    """
    paths = catalog_by_id()
    if path_id not in paths:
        raise UnknownPath(path_id)
    if goal not in GOALS:
        raise UnknownGoal(goal)
    templates = _templates()
    path = paths[path_id]
    rendered = templates.render_server(path_id, goal)

    bundle_dir = Path(out_dir) / f"{path_id}_{goal}"
    bundle_dir.mkdir(parents=True, exist_ok=True)
    for relpath, content in rendered["files"].items():
        target = bundle_dir / relpath
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "path_id": path_id,
        "goal": goal,
        "rendering": path.render(),
        "stage": path.signature.stage.value,
        "injection_points": sorted(path.injection_points),
        **rendered["manifest"],
    }
    _validate_manifest(manifest)
    (bundle_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    return FixtureBundle(path_id=path_id, goal=goal, directory=str(bundle_dir),
                         manifest=manifest)


def _validate_manifest(manifest: dict):
    """Technique labels must be compatible with their injection component;
    markers must be sandbox-observable (file effect or sink-log entry)."""
    labels = manifest.get("technique_labels", {})
    for component, techniques in labels.items():
        group = component_group(component)
        allowed = compatible_techniques(group)
        bad = set(techniques) - allowed
        if bad:
            raise ValueError(
                f"{manifest['path_id']}: techniques {sorted(bad)} not compatible "
                f"with component {component}"
            )
    marker = manifest.get("expected_marker", {})
    kind = marker.get("kind")
    allowed_kinds = {
        "sink_log_contains", "file_exists", "file_absent",
        "file_contains", "file_suffix_present",
    }
    if kind not in allowed_kinds:
        raise ValueError(f"{manifest['path_id']}: unsafe or missing marker kind {kind!r}")


def emit_corpus(out_dir: str | Path, path_ids: list[str] | None = None,
                goals: list[str] | None = None) -> list[FixtureBundle]:
    """The full corpus (19 paths × 6 goals = 114 bundles) or a subset."""
    paths = path_ids or sorted(catalog_by_id(), key=lambda p: int(p.lstrip("P").rstrip("+")))
    goals = goals or list(GOALS)
    bundles = []
    for path_id in paths:
        for goal in goals:
            bundles.append(emit_fixture(path_id, goal, out_dir))
    return bundles


def check_marker(manifest: dict, workspace: str | Path, sink_log: str | Path) -> bool:
    """Did the fixture's expected marker occur? Used by harnesses/tests."""
    marker = manifest["expected_marker"]
    kind = marker["kind"]
    workspace = Path(workspace)
    if kind == "sink_log_contains":
        try:
            text = Path(sink_log).read_text(encoding="utf-8")
        except OSError:
            return False
        return marker["needle"] in text
    if kind == "file_exists":
        return (workspace / marker["path"]).exists()
    if kind == "file_absent":
        return not (workspace / marker["path"]).exists()
    if kind == "file_contains":
        target = workspace / marker["path"]
        if not target.is_file():
            return False
        return marker["needle"] in target.read_text(encoding="utf-8", errors="replace")
    if kind == "file_suffix_present":
        return any(workspace.rglob(f"*{marker['suffix']}"))
    raise ValueError(f"unknown marker kind {kind!r}")
