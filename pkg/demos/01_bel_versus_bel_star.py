"""Three candidate layouts and a single light seen at 30% of ship length.

Target 1 has portholes at 20% and 40%, so two different portholes could
have produced the light.  Target 2 has one porthole at 40%.  Target 3's
portholes (50%, 70%) are too far aft to explain it.

Summing over explanations (bel) rewards target 1 for having two of them;
taking only the best explanation (bel*) does not.
"""

from shipbbn import bel_star, posterior_bel
from shipbbn import fixtures as F

net = F.three_target_classifier()
evidence = F.classifier_sightings(net, [30])
targets = net.var("Target").states

bel = posterior_bel(net, evidence, "Target")
best = bel_star(net, evidence, "Target")

print(f"{'target':<10}{'bel':>10}{'bel*':>10}")
for t, b, s in zip(targets, bel, best):
    print(f"{t:<10}{b:>10.4f}{s:>10.4f}")
print()
print("bel counts every way of producing the light; bel* asks how good the best one is.")
