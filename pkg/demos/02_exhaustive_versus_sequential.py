"""Two ways to encode the same porthole explanations.

The exhaustive network lists every explanation sequence as one state of a
single Outcome node.  The sequential network walks the slots one at a time,
remembering only the last porthole used and how many false detections were
spent.  Both give the same best-explanation beliefs; only one scales.
"""

import time

from shipbbn import (ObservationProblem, StateSpaceTooLarge, bel_star, build_exhaustive_net,
                     build_sd_net, count_outcomes, sighting_evidence)
from shipbbn import fixtures as F

p = F.problem_3w()
evidence = sighting_evidence(p, findings={"O1": list(F.SOFT_SIGHTING_20)})

for name, build in (("exhaustive", build_exhaustive_net), ("sequential", build_sd_net)):
    net = build(p)
    widest = max(net.var(v).card for v in net.names)
    t, o = bel_star(net, evidence, "Target")
    print(f"{name:<11} widest node {widest:>3} states   bel*(T)={t:.4f}  bel*(O)={o:.4f}")

# one wrong sighting is absorbed, a second one is not
sd = build_sd_net(p)
for sightings in ([50], [50, 90], [50, 90, 100]):
    t, _ = bel_star(sd, sighting_evidence(p, sightings), "Target")
    print(f"sightings {str(sightings):<14} bel*(T)={t:.4f}")

print()
big = ObservationProblem(tuple(range(5, 100, 8))[:12], slots=12, false_budget=2)
total, by_w = count_outcomes(big.n, big.slots, big.false_budget)
print(f"12 portholes, 12 slots, 2 false: {total} explanation sequences {dict(by_w)}")
start = time.perf_counter()
net = build_sd_net(big)
print(f"sequential build: {time.perf_counter() - start:.3f}s, "
      f"widest node {max(net.var(v).card for v in net.names)} states")
try:
    build_exhaustive_net(big)
except StateSpaceTooLarge as exc:
    print(f"exhaustive build: {exc}")
