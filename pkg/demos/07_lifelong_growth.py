"""Graph growth when the same area is traversed again and again.

Without pruning the vertex count grows linearly with the number of
passes. With density-driven pruning it converges to a level set by the
density threshold and the size of the area, which is the property that
keeps optimization time bounded over a robot's lifetime.
"""

from pgprune import PRESETS, GridSpec
from pgprune.montecarlo import simulate_repeated_traversal

grid = GridSpec(12, 12, 0.3)
passes = 12

bounded = simulate_repeated_traversal(grid, passes, PRESETS["p_aggressive"])
linear = simulate_repeated_traversal(grid, passes, None)

print(f"{'pass':>5} {'no pruning':>11} {'aggressive':>11}")
for k in range(passes):
    print(f"{k + 1:>5} {linear[k]:>11} {bounded[k]:>11}")

print(f"\nno pruning: pass {passes} holds {linear[-1] / linear[0]:.0f}x the first pass")
print(f"aggressive: pass {passes} holds {bounded[-1] / bounded[0]:.2f}x the first pass "
      f"(count has converged)")
