"""Coarse-to-fine: decide frigate vs destroyer first, then which ship.

Each level only commits when its best hypothesis is both likely enough and
clearly ahead of the runner-up.  Otherwise the last confident label is
returned together with the trace of what was decided where.
"""

from shipbbn import classify_hierarchical, load_taxonomy, next_informative_feature
from shipbbn import fixtures as F

tree = load_taxonomy(F.sample_taxonomy_dict())
db = F.sample_database()

cases = {
    "everything seen": {"Length": "short", "Masts": "one", "Bow": "<25%", "Stern": "Round",
                        "portholes": [20, 50, 70]},
    "only the masts": {"Masts": "one"},
    "destroyer, no detail": {"Masts": "two"},
}
for title, evidence in cases.items():
    result = classify_hierarchical(tree, evidence, db)
    status = "final" if result.complete else "partial"
    print(f"{title}: {status} label {result.label!r}")
    for step in result.trace:
        beliefs = ", ".join(f"{k} {v:.2f}" for k, v in step.beliefs.items())
        outcome = step.decision if step.conclusive else f"stopped ({step.reason})"
        print(f"    {'  ' * step.depth}{step.level}: {beliefs or '-'} -> {outcome}")

print()
print("most useful next look at the top level:",
      next_informative_feature(tree.classifier, ["Length", "Masts"], {"Masts": "one"}))
