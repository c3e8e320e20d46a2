"""Canonical influence-path space for malicious MCP servers.

An influence path is a directed sequence through injection points, LLM
interaction stages, and execution sinks. Each path carries a canonical
signature ⟨med, stage, sink, carrier⟩:

- med: whether the chain needs adversarial steering of the LLM at all
  (LLM-mediated) or executes directly (Direct);
- stage: which interaction round is influenced (first, second, both via a
  carried artifact, or none);
- sink: where execution lands (host builtin, tool source code, resource
  handler code);
- carrier: the post-execution artifact that transports second-stage
  injection (resource response or tool response), if any.

Enumeration over the signature space yields 26 feasible paths; collapsing
the tool-description/argument-schema twins (equivalent pre-execution
context) leaves 16 semantically independent ones. The working catalog has
19 entries: the 16, two argument-schema counterparts kept to exercise
position equivalence, and one configuration-command path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class Med(Enum):
    LLM_MEDIATED = "LLM"
    DIRECT = "Direct"


class Stage(Enum):
    LLM1 = "LLM1"
    LLM2 = "LLM2"
    LLM1PLUS2 = "LLM1+2"
    NONE = "∅"


class Sink(Enum):
    BUILTIN = "Builtin"
    TSC = "TSC"
    RSC = "RSC"


class Carrier(Enum):
    RR = "RR"
    TR = "TR"
    NONE = "∅"


# Path elements. A/B/C are tool identities, suffixes name the component:
# TD tool description, AS argument schema, TSC tool source code, TR tool
# response; RR/RSC are the resource response and resource handler code.
ELEMENTS = (
    "A_TD", "A_AS", "A_TSC", "B_TSC", "C_TSC", "A_TR", "B_TR",
    "RR", "RSC", "LLM1", "LLM2", "LLM3", "Builtin", "CONFIG", "TSC",
)

EDGE_LABELS = ("plain", "arg", "uri")

# Component groups for technique compatibility.
GROUP_TD_AS = "TD_AS"
GROUP_TR_RR = "TR_RR"
GROUP_TSC_RSC = "TSC_RSC"
COMPONENT_GROUPS = (GROUP_TD_AS, GROUP_TR_RR, GROUP_TSC_RSC)

_COMPONENT_TO_GROUP = {
    "TD": GROUP_TD_AS,
    "AS": GROUP_TD_AS,
    "TR": GROUP_TR_RR,
    "RR": GROUP_TR_RR,
    "TSC": GROUP_TSC_RSC,
    "RSC": GROUP_TSC_RSC,
    # Configuration commands execute directly; they sit with the
    # code-bearing components for technique purposes.
    "CONFIG": GROUP_TSC_RSC,
}


class UnsupportedExtension(Exception):
    pass


@dataclass(frozen=True)
class CanonicalSignature:
    med: Med
    stage: Stage
    sink: Sink | None  # None only for the configuration-command path
    carrier: Carrier

    def __post_init__(self):
        if self.stage is Stage.NONE and self.med is not Med.DIRECT:
            raise ValueError("stage ∅ implies direct execution")
        if self.carrier is not Carrier.NONE and self.stage is not Stage.LLM1PLUS2:
            raise ValueError("a carrier implies cross-stage influence")


@dataclass(frozen=True)
class InfluencePath:
    elements: tuple[str, ...]
    labels: tuple[str, ...]  # edge label into elements[i+1]
    signature: CanonicalSignature
    injection_points: frozenset[str]
    id: str | None = None
    direct_join: bool = False  # render with " + " (tool-pair direct path)

    def __post_init__(self):
        if self.elements and len(self.labels) != len(self.elements) - 1:
            raise ValueError("need one edge label per adjacent element pair")
        for el in self.elements:
            if el not in ELEMENTS:
                raise ValueError(f"unknown element {el!r}")
        for lab in self.labels:
            if lab not in EDGE_LABELS:
                raise ValueError(f"unknown edge label {lab!r}")

    def render(self) -> str:
        if self.direct_join:
            return " + ".join(self.elements)
        parts = [self.elements[0]]
        for label, element in zip(self.labels, self.elements[1:]):
            arrow = " → " if label == "plain" else f" →{label} "
            parts.append(arrow + element)
        return "".join(parts)


def parse_rendering(text: str) -> tuple[tuple[str, ...], tuple[str, ...], bool]:
    """Inverse of InfluencePath.render; returns (elements, labels, direct)."""
    text = text.strip()
    if " → " not in text and "→" not in text:
        if " + " in text:
            elements = tuple(p.strip() for p in text.split(" + "))
            return elements, ("plain",) * (len(elements) - 1), True
        return (text,), (), False
    elements: list[str] = []
    labels: list[str] = []
    chunks = text.split("→")
    elements.append(chunks[0].strip())
    for chunk in chunks[1:]:
        chunk = chunk.rstrip()
        if chunk.startswith("arg "):
            labels.append("arg")
            elements.append(chunk[4:].strip())
        elif chunk.startswith("uri "):
            labels.append("uri")
            elements.append(chunk[4:].strip())
        else:
            labels.append("plain")
            elements.append(chunk.strip())
    return tuple(elements), tuple(labels), False


def _injection_points(elements: tuple[str, ...]) -> frozenset[str]:
    """Attacker-manipulated components along the chain.

    Context sources (TD/AS/TR/RR) are always attacker-authored; a TSC or
    RSC sink means the malicious logic lives in server code too. Builtin
    sinks belong to the host, so they never count.
    """
    points = set()
    for el in elements:
        if el in ("A_TD",):
            points.add("TD")
        elif el in ("A_AS",):
            points.add("AS")
        elif el in ("A_TR", "B_TR"):
            points.add("TR")
        elif el == "RR":
            points.add("RR")
        elif el in ("A_TSC", "B_TSC", "C_TSC", "TSC"):
            points.add("TSC")
        elif el == "RSC":
            points.add("RSC")
        elif el == "CONFIG":
            points.add("CONFIG")
    return frozenset(points)


def _make(elements, labels, med, stage, sink, carrier, path_id=None, direct_join=False):
    elements = tuple(elements)
    labels = tuple(labels)
    # TR appearing mid-chain as a carrier is injected; TR as the entry is too.
    return InfluencePath(
        elements=elements,
        labels=labels,
        signature=CanonicalSignature(med=med, stage=stage, sink=sink, carrier=carrier),
        injection_points=_injection_points(elements),
        id=path_id,
        direct_join=direct_join,
    )


_SINK_ELEMENT = {"Builtin": Sink.BUILTIN, "RSC": Sink.RSC,
                 "A_TSC": Sink.TSC, "B_TSC": Sink.TSC, "C_TSC": Sink.TSC,
                 "TSC": Sink.TSC}


def _edge_into(sink_element: str) -> str:
    return "uri" if sink_element in ("RSC", "RR") else "arg"


def enumerate_feasible() -> list[InfluencePath]:
    """All 26 feasible influence paths, in canonical enumeration order.

    Production rules per influenced stage:
    - first stage only: {TD, AS} sources × sinks {Builtin, B_TSC, A_TSC, RSC};
    - second stage only: the tool response is the sole entry (a resource
      response cannot start a second-stage-only path, because the resource
      request itself is a first-stage act) × {B_TSC, Builtin, A_TSC, RSC};
    - both stages: {TD, AS} × (resource-response carrier × {B_TSC, A_TSC,
      Builtin} ∪ tool-response carrier × {RSC, A_TSC, Builtin});
    - direct: a single malicious tool, or a cooperating tool pair.
    """
    paths: list[InfluencePath] = []

    for sink_el in ("Builtin", "B_TSC", "A_TSC", "RSC"):
        for source in ("A_TD", "A_AS"):
            paths.append(_make(
                (source, "LLM1", sink_el),
                ("plain", _edge_into(sink_el)),
                Med.LLM_MEDIATED, Stage.LLM1, _SINK_ELEMENT[sink_el], Carrier.NONE,
            ))

    for sink_el in ("B_TSC", "Builtin", "A_TSC", "RSC"):
        paths.append(_make(
            ("A_TR", "LLM2", sink_el),
            ("plain", _edge_into(sink_el)),
            Med.LLM_MEDIATED, Stage.LLM2, _SINK_ELEMENT[sink_el], Carrier.NONE,
        ))

    for sink_el in ("B_TSC", "A_TSC", "Builtin"):  # resource-response carrier
        for source in ("A_TD", "A_AS"):
            paths.append(_make(
                (source, "LLM1", "RR", "LLM2", sink_el),
                ("plain", "uri", "plain", _edge_into(sink_el)),
                Med.LLM_MEDIATED, Stage.LLM1PLUS2, _SINK_ELEMENT[sink_el], Carrier.RR,
            ))
    for sink_el in ("RSC", "A_TSC", "Builtin"):  # tool-response carrier
        for source in ("A_TD", "A_AS"):
            paths.append(_make(
                (source, "LLM1", "B_TR", "LLM2", sink_el),
                ("plain", "plain", "plain", _edge_into(sink_el)),
                Med.LLM_MEDIATED, Stage.LLM1PLUS2, _SINK_ELEMENT[sink_el], Carrier.TR,
            ))

    paths.append(_make(("TSC",), (), Med.DIRECT, Stage.NONE, Sink.TSC, Carrier.NONE))
    paths.append(_make(("A_TSC", "B_TSC"), ("plain",), Med.DIRECT, Stage.NONE,
                       Sink.TSC, Carrier.NONE, direct_join=True))
    return paths


def deduplicate(paths: list[InfluencePath]) -> list[InfluencePath]:
    """Collapse TD/AS twin pairs, keeping the TD-based version.

    Both components are pre-execution context handed to the LLM as one
    block, so twins differing only in the first element are semantically
    equivalent.
    """
    kept = []
    for path in paths:
        if path.elements and path.elements[0] == "A_AS":
            td_twin = ("A_TD",) + path.elements[1:]
            if any(p.elements == td_twin for p in paths):
                continue
        kept.append(path)
    return kept


def removed_pairs(paths: list[InfluencePath]) -> list[tuple[InfluencePath, InfluencePath]]:
    """The (kept, removed) TD/AS twin pairs dropped by deduplicate."""
    by_elements = {p.elements: p for p in paths}
    pairs = []
    for path in paths:
        if path.elements and path.elements[0] == "A_AS":
            twin = by_elements.get(("A_TD",) + path.elements[1:])
            if twin is not None:
                pairs.append((twin, path))
    return pairs


_CATALOG_SPEC = [
    # (id, rendering, med, stage, sink, carrier, direct_join)
    ("P1", "A_TD → LLM1 →arg Builtin", Med.LLM_MEDIATED, Stage.LLM1, Sink.BUILTIN, Carrier.NONE),
    ("P2", "A_AS → LLM1 →arg Builtin", Med.LLM_MEDIATED, Stage.LLM1, Sink.BUILTIN, Carrier.NONE),
    ("P3", "A_TD → LLM1 →arg B_TSC", Med.LLM_MEDIATED, Stage.LLM1, Sink.TSC, Carrier.NONE),
    ("P4", "A_TD → LLM1 →arg A_TSC", Med.LLM_MEDIATED, Stage.LLM1, Sink.TSC, Carrier.NONE),
    ("P5", "A_AS → LLM1 →arg A_TSC", Med.LLM_MEDIATED, Stage.LLM1, Sink.TSC, Carrier.NONE),
    ("P6", "A_TD → LLM1 →uri RSC", Med.LLM_MEDIATED, Stage.LLM1, Sink.RSC, Carrier.NONE),
    ("P7", "A_TR → LLM2 →arg B_TSC", Med.LLM_MEDIATED, Stage.LLM2, Sink.TSC, Carrier.NONE),
    ("P8", "A_TR → LLM2 →arg Builtin", Med.LLM_MEDIATED, Stage.LLM2, Sink.BUILTIN, Carrier.NONE),
    ("P9", "A_TR → LLM2 →arg A_TSC", Med.LLM_MEDIATED, Stage.LLM2, Sink.TSC, Carrier.NONE),
    ("P10", "A_TR → LLM2 →uri RSC", Med.LLM_MEDIATED, Stage.LLM2, Sink.RSC, Carrier.NONE),
    ("P11", "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.TSC, Carrier.RR),
    ("P12", "A_TD → LLM1 →uri RR → LLM2 →arg A_TSC",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.TSC, Carrier.RR),
    ("P13", "A_TD → LLM1 →uri RR → LLM2 →arg Builtin",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.BUILTIN, Carrier.RR),
    ("P14", "A_TD → LLM1 → B_TR → LLM2 →uri RSC",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.RSC, Carrier.TR),
    ("P15", "A_TD → LLM1 → B_TR → LLM2 →arg A_TSC",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.TSC, Carrier.TR),
    ("P16", "A_TD → LLM1 → B_TR → LLM2 →arg Builtin",
     Med.LLM_MEDIATED, Stage.LLM1PLUS2, Sink.BUILTIN, Carrier.TR),
    ("P17", "TSC", Med.DIRECT, Stage.NONE, Sink.TSC, Carrier.NONE),
    ("P18", "A_TSC + B_TSC", Med.DIRECT, Stage.NONE, Sink.TSC, Carrier.NONE),
    ("P19", "CONFIG", Med.DIRECT, Stage.NONE, None, Carrier.NONE),
]


def catalog() -> list[InfluencePath]:
    """The 19-entry working catalog P1..P19.

    Sixteen semantically independent paths, the two argument-schema
    counterparts (P2, P5) retained to verify injection-point equivalence,
    and the configuration-command path (P19).
    """
    out = []
    for pid, rendering, med, stage, sink, carrier in _CATALOG_SPEC:
        elements, labels, direct = parse_rendering(rendering)
        out.append(_make(elements, labels, med, stage, sink, carrier,
                         path_id=pid, direct_join=direct))
    return out


def catalog_by_id() -> dict[str, InfluencePath]:
    return {p.id: p for p in catalog()}


_EXTENSIONS = {
    "P11": "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC → B_TR → LLM3 →arg C_TSC",
    "P13": "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC → B_TR → LLM3 →arg Builtin",
    "P15": "A_TD → LLM1 → B_TR → LLM2 →arg A_TSC → A_TR → LLM3 →arg C_TSC",
}


def extend_to_three_stages(path: InfluencePath) -> InfluencePath:
    """Published 3-stage extensions: a further tool invocation and LLM round.

    Only P11, P13, and P15 have published extensions; anything else raises
    UnsupportedExtension.
    """
    if path.id not in _EXTENSIONS:
        raise UnsupportedExtension(f"no published 3-stage extension for {path.id}")
    rendering = _EXTENSIONS[path.id]
    elements, labels, _ = parse_rendering(rendering)
    final_sink = _SINK_ELEMENT[elements[-1]]
    signature = replace(path.signature, sink=final_sink)
    return InfluencePath(
        elements=elements,
        labels=labels,
        signature=signature,
        injection_points=_injection_points(elements),
        id=f"{path.id}+",
    )


# -- technique compatibility -------------------------------------------------

TECHNIQUES = (
    "Malicious Code Execution",
    "Command Injection",
    "Puppet Attack",
    "Control-flow Hijacking",
    "Preference Manipulation",
    "Malicious External Resource",
    "Shadowing Attack",
    "Rug Pull",
    "Multi-Tool Coordination",
    "Sandbox Escape",
)

# Context-bearing artifacts (descriptions/schemas, responses) support prompt
# injection techniques; code-bearing components enable direct execution.
_TECHNIQUE_MATRIX: dict[str, tuple[bool, bool, bool]] = {
    #                               TD_AS  TR_RR  TSC_RSC
    "Malicious Code Execution":    (False, False, True),
    "Command Injection":           (False, False, True),
    "Puppet Attack":               (True,  True,  False),
    "Control-flow Hijacking":      (True,  True,  False),
    "Preference Manipulation":     (True,  True,  False),
    "Malicious External Resource": (False, True,  False),
    "Shadowing Attack":            (True,  False, True),
    "Rug Pull":                    (False, False, True),
    "Multi-Tool Coordination":     (True,  True,  True),
    "Sandbox Escape":              (False, False, True),
}


@dataclass(frozen=True)
class TechniqueMatrix:
    techniques: tuple[str, ...] = TECHNIQUES
    compatibility: dict = field(default_factory=lambda: dict(_TECHNIQUE_MATRIX))

    def groups_for(self, technique: str) -> set[str]:
        flags = self.compatibility[technique]
        return {g for g, ok in zip(COMPONENT_GROUPS, flags) if ok}


def compatible_techniques(component_group: str) -> set[str]:
    """Techniques applicable to one component group (matrix column)."""
    if component_group not in COMPONENT_GROUPS:
        raise ValueError(f"unknown component group {component_group!r}")
    idx = COMPONENT_GROUPS.index(component_group)
    return {t for t, flags in _TECHNIQUE_MATRIX.items() if flags[idx]}


def component_group(component: str) -> str:
    """Map a single component kind (TD, AS, TR, RR, TSC, RSC, CONFIG)."""
    try:
        return _COMPONENT_TO_GROUP[component]
    except KeyError:
        raise ValueError(f"unknown component {component!r}") from None


def path_to_dict(path: InfluencePath) -> dict:
    return {
        "id": path.id,
        "rendering": path.render(),
        "elements": list(path.elements),
        "labels": list(path.labels),
        "injection_points": sorted(path.injection_points),
        "med": path.signature.med.value,
        "stage": path.signature.stage.value,
        "sink": path.signature.sink.value if path.signature.sink else None,
        "carrier": path.signature.carrier.value,
    }
