"""Frozen expected values for the acceptance suite.

CATALOG_TABLE rows: (id, rendering, injection points, stage label).
TECHNIQUE_TABLE rows: technique -> (TD_AS, TR_RR, TSC_RSC) applicability.
"""

CATALOG_TABLE = [
    ("P1", "A_TD → LLM1 →arg Builtin", {"TD"}, "LLM1"),
    ("P2", "A_AS → LLM1 →arg Builtin", {"AS"}, "LLM1"),
    ("P3", "A_TD → LLM1 →arg B_TSC", {"TD", "TSC"}, "LLM1"),
    ("P4", "A_TD → LLM1 →arg A_TSC", {"TD", "TSC"}, "LLM1"),
    ("P5", "A_AS → LLM1 →arg A_TSC", {"AS", "TSC"}, "LLM1"),
    ("P6", "A_TD → LLM1 →uri RSC", {"TD", "RSC"}, "LLM1"),
    ("P7", "A_TR → LLM2 →arg B_TSC", {"TR", "TSC"}, "LLM2"),
    ("P8", "A_TR → LLM2 →arg Builtin", {"TR"}, "LLM2"),
    ("P9", "A_TR → LLM2 →arg A_TSC", {"TR", "TSC"}, "LLM2"),
    ("P10", "A_TR → LLM2 →uri RSC", {"TR", "RSC"}, "LLM2"),
    ("P11", "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC", {"TD", "RR", "TSC"}, "LLM1+2"),
    ("P12", "A_TD → LLM1 →uri RR → LLM2 →arg A_TSC", {"TD", "RR", "TSC"}, "LLM1+2"),
    ("P13", "A_TD → LLM1 →uri RR → LLM2 →arg Builtin", {"TD", "RR"}, "LLM1+2"),
    ("P14", "A_TD → LLM1 → B_TR → LLM2 →uri RSC", {"TD", "TR", "RSC"}, "LLM1+2"),
    ("P15", "A_TD → LLM1 → B_TR → LLM2 →arg A_TSC", {"TD", "TR", "TSC"}, "LLM1+2"),
    ("P16", "A_TD → LLM1 → B_TR → LLM2 →arg Builtin", {"TD", "TR"}, "LLM1+2"),
    ("P17", "TSC", {"TSC"}, "∅"),
    ("P18", "A_TSC + B_TSC", {"TSC"}, "∅"),
    ("P19", "CONFIG", {"CONFIG"}, "∅"),
]

EXTENSION_TABLE = {
    "P11": "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC → B_TR → LLM3 →arg C_TSC",
    "P13": "A_TD → LLM1 →uri RR → LLM2 →arg B_TSC → B_TR → LLM3 →arg Builtin",
    "P15": "A_TD → LLM1 → B_TR → LLM2 →arg A_TSC → A_TR → LLM3 →arg C_TSC",
}

TECHNIQUE_TABLE = {
    "Malicious Code Execution": (False, False, True),
    "Command Injection": (False, False, True),
    "Puppet Attack": (True, True, False),
    "Control-flow Hijacking": (True, True, False),
    "Preference Manipulation": (True, True, False),
    "Malicious External Resource": (False, True, False),
    "Shadowing Attack": (True, False, True),
    "Rug Pull": (False, False, True),
    "Multi-Tool Coordination": (True, True, True),
    "Sandbox Escape": (False, False, True),
}
