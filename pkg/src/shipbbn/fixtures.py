"""Small ready-made models: the two-feature tables, the porthole scenarios,
and a sample ship database with a two-level taxonomy.

Everything here is synthetic.  The sample taxonomy reads
``contact -> {frigate, destroyer} -> class designation``.
"""

from __future__ import annotations

from .network import BeliefNetwork, build_network
from .obsnet import NOT_OBS, ObservationProblem, build_porthole_classifier, nearest_bin
from .shipdb import ShipDatabase, TargetRecord
from .toengine import PortholeFeature, TOModule, build_to_module

BOW = ("Bow", ("<25%", ">=25%"))
STERN = ("Stern", ("Round", "Curved", "Straight"))

# per-target expected feature distributions, columns of the two-feature tables
BOW_TABLE = {"S1": (1.0, 0.0), "S2": (0.2, 0.8), "S3": (0.0, 1.0)}
STERN_TABLE = {"S1": (0.7, 0.3, 0.0), "S2": (0.1, 0.8, 0.1), "S3": (0.2, 0.1, 0.7)}

# single sighting at ~20% of ship length, one weight per 10%..90% bin
SOFT_SIGHTING_20 = (5, 20, 5, 1, 1, 1, 1, 1, 1)

THREE_TARGET_PORTHOLES = {"target-1": (20, 40), "target-2": (40,), "target-3": (50, 70)}


def two_feature_network(priors=(1 / 3, 1 / 3, 1 / 3)) -> BeliefNetwork:
    """Target {S1, S2, S3} with Bow and Stern children."""
    ids = list(BOW_TABLE)
    return build_network(
        [("Target", ids), BOW, STERN],
        [("Target", "Bow"), ("Target", "Stern")],
        {"Target": list(priors),
         "Bow": [list(BOW_TABLE[i]) for i in ids],
         "Stern": [list(STERN_TABLE[i]) for i in ids]},
    )


def two_feature_records() -> list[TargetRecord]:
    return [
        TargetRecord(i, features={"Bow": dict(zip(BOW[1], BOW_TABLE[i])),
                                  "Stern": dict(zip(STERN[1], STERN_TABLE[i]))})
        for i in BOW_TABLE
    ]


def two_feature_module(portholes: PortholeFeature | None = None) -> TOModule:
    return build_to_module([BOW, STERN], portholes)


def three_target_classifier() -> BeliefNetwork:
    """Three layouts, one sighting slot, no false detections."""
    return build_porthole_classifier(THREE_TARGET_PORTHOLES, slots=1, false_budget=0)


def classifier_sightings(net: BeliefNetwork, sightings) -> dict:
    """Hard findings for a porthole classifier; unused slots read ``NOT-OBS``."""
    slots = [v for v in net.names if v.startswith("O") and v[1:].isdigit()]
    locs = sorted(sightings)
    if len(locs) > len(slots):
        raise ValueError(f"{len(locs)} sightings exceed {len(slots)} slots")
    out = {}
    for t, name in enumerate(slots):
        states = net.var(name).states
        out[name] = states[nearest_bin(locs[t], 10.0)] if t < len(locs) else NOT_OBS
    return out


def three_target_records() -> list[TargetRecord]:
    return [TargetRecord(i, portholes=p) for i, p in THREE_TARGET_PORTHOLES.items()]


def problem_3w(**kw) -> ObservationProblem:
    """Three portholes and one deck hatch; three sightings, one may be false.

    The hatch sits at 40% so it can be mistaken for a porthole light.
    """
    args = dict(portholes=(20, 50, 70), hatches=(40,), slots=3, false_budget=1, grid=10)
    args.update(kw)
    return ObservationProblem(**args)


def sample_database() -> ShipDatabase:
    frig = ("frigate",)
    dest = ("destroyer",)

    def rec(i, cls, path, bow, stern, portholes, hatches=()):
        return TargetRecord(i, cls, path, portholes, hatches,
                            {"Bow": dict(zip(BOW[1], bow)), "Stern": dict(zip(STERN[1], stern))})

    return ShipDatabase([
        rec("S1", "FF-1052", frig, BOW_TABLE["S1"], STERN_TABLE["S1"], (20, 50, 70), (40,)),
        rec("S2", "FFG-7", frig, BOW_TABLE["S2"], STERN_TABLE["S2"], (30, 60)),
        rec("S3", "F-2000", frig, BOW_TABLE["S3"], STERN_TABLE["S3"], (10, 40, 80), (60,)),
        rec("D1", "DDG-51", dest, (0.9, 0.1), (0.1, 0.1, 0.8), (20, 30, 60, 80)),
        rec("D2", "DD-963", dest, (0.1, 0.9), (0.8, 0.1, 0.1), (40, 70)),
    ])


def sample_taxonomy_dict() -> dict:
    category_net = {
        "variables": [
            {"name": "Category", "states": ["frigate", "destroyer"]},
            {"name": "Length", "states": ["short", "long"]},
            {"name": "Masts", "states": ["one", "two"]},
        ],
        "edges": [["Category", "Length"], ["Category", "Masts"]],
        "tables": [
            {"child": "Category", "parents": [], "rows": [[0.5, 0.5]]},
            {"child": "Length", "parents": ["Category"], "rows": [[0.85, 0.15], [0.2, 0.8]]},
            {"child": "Masts", "parents": ["Category"], "rows": [[0.7, 0.3], [0.4, 0.6]]},
        ],
    }
    leaf = {"type": "targets",
            "features": [{"name": "Bow", "states": list(BOW[1])},
                         {"name": "Stern", "states": list(STERN[1])}],
            "portholes": {"slots": 4, "false_budget": 1, "grid": 10}}
    return {
        "schema_version": 1,
        "root": {
            "label": "contact",
            "thresholds": {"absolute": 0.6, "ratio": 2.0},
            "classifier": {"type": "network", "hypothesis": "Category", "network": category_net},
            "children": [
                {"label": "frigate", "classifier": leaf},
                {"label": "destroyer", "classifier": leaf},
            ],
        },
    }
