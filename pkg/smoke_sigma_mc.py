import numpy as np

from rcmlab.environment import ConductanceLaw, Environment, periodize
from rcmlab import corrector as co
from rcmlab.walk import simulate_on_graph

env = Environment(dim=2, p=0.7, seed=3, law=ConductanceLaw("pareto", (3.0,)))
g = periodize(env, 5)
rep = co.effective_diffusivity(env, 5)
print("corrector sigma_v^2", rep.sigma_v_sq)

t = 30.0
n = 800
disp = np.empty((n, 2))
rng_starts = np.arange(n) % g.n_vertices
for i in range(n):
    gw = simulate_on_graph(g, int(rng_starts[i]), t, run_seed=12345, walk_index=i)
    disp[i] = gw.displacements[-1]
var = disp.var(axis=0, ddof=1)
print("per-coordinate Var/t:", var / t, "target", rep.sigma_v_sq)
