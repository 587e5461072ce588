"""
Scoring, the ambiguity band and view refinement
===============================================

Walk through one waypoint by hand: score the current view, decide whether it
is worth a closer look, rotate in place, and keep the best view.
"""

import numpy as np

from divrr import RefineConfig, TokenEvidence, classify, relevance_score, select_verified
from divrr.refine import rotation_headings
from divrr.relevance import polar_logits

cfg = RefineConfig()

# Relevance is the softmax mass on the affirmative token.
ev = TokenEvidence({"Yes": 1.3, "No": 0.9})
s = relevance_score(ev)
print(f"logits Yes=1.3 No=0.9  ->  s={s:.4f}  ({classify(s, cfg)})")

# Adding a constant to every logit changes nothing.
shifted = TokenEvidence({"Yes": 101.3, "No": 100.9})
print("shift invariant:", np.isclose(s, relevance_score(shifted)))

# The thresholds split [0, 1] into three bands.
for v in (0.59, 0.60, 0.79, 0.80, 0.81):
    print(f"  s={v:.2f} -> {classify(v, cfg)}")

# An ambiguous view triggers K rotations spread evenly around the circle.
print("rotation headings from 90 deg:", rotation_headings(90.0, cfg.view_budget))

# polar_logits inverts a score back to logits; handy for scripted providers.
print("logits for s=0.9:", {k: round(v, 3) for k, v in polar_logits(0.9).items()})

# A real rotation: two objects in a 7x7 room, the agent looking at one of them.
from divrr import Pose, Question, SyntheticRelevanceProvider, World, collect_views, observe  # noqa: E402
from divrr.config import SyntheticProviderConfig  # noqa: E402
from divrr.world import WorldObject  # noqa: E402

free = [(x, y) for x in range(7) for y in range(7)]
objs = (WorldObject("lamp", "lamp", {"color": "white"}, (6, 3)), WorldObject("sofa", "sofa", {"color": "green"}, (0, 3)))
room = World(7, 7, frozenset(), {c: "living" for c in free}, objs, ())
start = Pose(3, 3, 0.0, 0)
q = Question("demo", "What colour is the sofa across from the lamp?", "attribute", "green",
             (("lamp", 1), ("sofa", 1)), "living", start)
provider = SyntheticRelevanceProvider(SyntheticProviderConfig(noise=0.0))

obs = observe(room, start)
first = provider.score(obs, q, room, 0).score
print(f"\nfacing east: s={first:.3f} ({classify(first, cfg)})")
views = collect_views(room, start, q, provider, cfg)
for o, v in views.views:
    print(f"  heading {o.pose.heading:5.1f}: s={v:.3f} sees {[e.id for e in o.visible]}")
# Lamp and sofa sit on opposite walls, so no single 110 deg view holds both and
# the original view wins the tie.
best, best_s = select_verified(views, (obs, first))
print(f"verified view faces {best.pose.heading:.0f} deg with s={best_s:.3f}; ties keep the earliest candidate")
