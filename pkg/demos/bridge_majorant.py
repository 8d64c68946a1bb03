"""
A Brownian bridge and its least concave majorant
================================================

Builds a bridge on a dyadic grid by midpoint refinement, takes the upper
hull of its graph and reports the largest vertical gap.  Saves a picture
when matplotlib is installed.
"""

import numpy as np

from bridgegap.montecarlo import chunk_rng, simulate_bridge_majorant

path = simulate_bridge_majorant(12, chunk_rng(2024, 0))
t_star = path.grid[path.argmax]
print(f"max gap {path.max_gap:.4f} at t = {t_star:.4f}")

# many paths: the gap distribution approaches that of M as the mesh shrinks
rng = chunk_rng(2024, 1)
gaps = np.array([simulate_bridge_majorant(10, rng).max_gap for _ in range(2000)])
print(f"2000 paths at mesh 2^-10: mean gap {gaps.mean():.4f}, P(gap <= 1) = {np.mean(gaps <= 1):.3f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(path.grid, path.values, lw=0.7, label="bridge")
    ax.plot(path.grid, path.majorant, lw=1.2, label="concave majorant")
    ax.vlines(t_star, path.values[path.argmax], path.majorant[path.argmax], color="k", lw=1)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig("bridge_majorant.png", dpi=120)
    print("wrote bridge_majorant.png")
