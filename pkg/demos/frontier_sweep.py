"""Trace the H(Z) vs I(X;Y|Z) trade-off of a random 8x8 joint by sweeping beta."""
import numpy as np

from latentsearch import SearchConfig, lower_envelope, run_search_grid

rng = np.random.default_rng(0)
p = rng.dirichlet(np.ones(64)).reshape(8, 8)

betas = np.linspace(0.0, 0.2, 11)
points = run_search_grid(p, 8, betas, SearchConfig(restarts=5, seed=1)).points

print(f"{len(points)} runs; lower envelope:")
print(f"{'beta':>6} {'H(Z)':>8} {'I(X;Y|Z)':>10}")
for t in lower_envelope(points):
    print(f"{t.beta:6.3f} {t.entropy_z:8.4f} {t.cmi:10.6f}")
