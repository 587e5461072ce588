"""
A person walks in front of a chair
==================================

One corridor, one chair, one person crossing the line of sight. The same
pose sees different things at different timesteps, which is the whole reason
a single glance is not enough evidence to store.
"""

from divrr import Pose, World, observe
from divrr.world import HumanTrack, WorldObject

# 9x3 corridor; the agent stands at the west end facing east (heading 0).
width, height = 9, 3
free = [(x, y) for x in range(width) for y in range(height)]
chair = WorldObject("chair1", "chair", {"color": "red"}, (6, 1))

# the person walks north to south through column 3, one cell per frame
path = [(3, 0)] * 4 + [(3, 1)] * 4 + [(3, 2)] * 4
person = HumanTrack("h1", tuple(path), ("reading",) * len(path))
world = World(width, height, frozenset(), {c: "hall" for c in free}, (chair,), (person,), horizon=len(path))

for t in (0, 5, 10):
    obs = observe(world, Pose(0, 1, 0.0, t))
    seen = ", ".join(f"{v.id}({v.detail})" for v in obs.visible) or "-"
    print(f"t={t:2d}  person at {path[t]}  visible: {seen:<40} occluded: {list(obs.occluded_ids)}")

# The static twin has the same layout with nobody in it.
static = world.without_humans()
print("static twin at t=5:", [v.id for v in observe(static, Pose(0, 1, 0.0, 5)).visible])
