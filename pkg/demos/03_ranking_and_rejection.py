"""Rank a small fleet with per-target {T | O} modules.

Each target is scored on its own: how well does "this is target i"
explain the observations compared with "it is something else"?  When no
target beats the alternative, the contact is reported as unknown.
"""

from shipbbn import TargetRecord, rank_targets, reject_decision, remove_target, upsert_target
from shipbbn.toengine import PortholeFeature
from shipbbn import fixtures as F

db = F.sample_database()
module = F.two_feature_module(PortholeFeature(slots=4))


def show(title, observations, db=db):
    ranking = rank_targets(db, module, observations)
    print(title)
    for r in ranking.results:
        print(f"  {r.target_id:<4} ratio {r.ratio:>10.4g}   bel*(T) {r.bel_star_T:.4f}")
    verdict, detail = reject_decision(ranking)
    print("  ->", detail if verdict == "reject" else f"best match {detail[0].target_id}")
    print()
    return ranking


before = show("short bow, round stern, lights at 20/50/70:",
              {"Bow": "<25%", "Stern": "Round", "portholes": [20, 50, 70]})
show("long bow, straight stern, lights at the very ends:",
     {"Bow": ">=25%", "Stern": "Straight", "portholes": [0, 100]})

# adding or removing database entries leaves everyone else's score alone
grown = upsert_target(db, TargetRecord("N1", "FFG-99", ("frigate",), (15, 45, 75), (),
                                       {"Bow": {"<25%": 0.6, ">=25%": 0.4},
                                        "Stern": {"Round": 0.3, "Curved": 0.3, "Straight": 0.4}}))
after = rank_targets(remove_target(grown, "S2"), module,
                     {"Bow": "<25%", "Stern": "Round", "portholes": [20, 50, 70]})
same = all(after.ratios()[k] == v for k, v in before.ratios().items() if k in after.ratios())
print("surviving ratios unchanged after editing the database:", same)
