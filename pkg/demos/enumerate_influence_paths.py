#!/usr/bin/env python3
"""Walk the influence-path space: enumeration, de-duplication, catalog.

Run:  python demos/enumerate_influence_paths.py
"""

from collections import Counter

from mcpvet import paths

# Step 1: systematic enumeration over the canonical signature space.
feasible = paths.enumerate_feasible()
print(f"feasible paths: {len(feasible)}")
by_stage = Counter(p.signature.stage.value for p in feasible)
for stage in ("LLM1", "LLM2", "LLM1+2", "∅"):
    print(f"  stage {stage:>6}: {by_stage[stage]}")

# Step 2: collapse description/schema twins (equivalent pre-execution context).
independent = paths.deduplicate(feasible)
pairs = paths.removed_pairs(feasible)
print(f"\nsemantically independent: {len(independent)} "
      f"(removed {len(pairs)} description/schema twins)")

# The working catalog: 16 independent + 2 schema counterparts + 1 config path.
print("\ncatalog:")
for path in paths.catalog():
    stage = path.signature.stage.value
    points = ",".join(sorted(path.injection_points))
    print(f"  {path.id:>4}  [{stage:>6}]  {path.render():<55} inject: {points}")

# Published 3-stage extensions append one more tool hop and LLM round.
print("\n3-stage extensions:")
byid = paths.catalog_by_id()
for pid in ("P11", "P13", "P15"):
    print(f"  {pid}+: {paths.extend_to_three_stages(byid[pid]).render()}")

# Technique compatibility: context-bearing components take prompt injection,
# code-bearing components take direct execution techniques.
print("\ntechnique compatibility:")
for group in ("TD_AS", "TR_RR", "TSC_RSC"):
    print(f"  {group}: {', '.join(sorted(paths.compatible_techniques(group)))}")
