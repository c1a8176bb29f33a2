import numpy as np

from rcmlab.environment import ConductanceLaw, Environment, periodize
from rcmlab import corrector as co

# 1) p=1 constant law: chi must vanish, sigma_v^2 = 2 in d=2
env = Environment(dim=2, p=1.0, seed=11, law=ConductanceLaw("constant", (1.0,)))
g = periodize(env, 4)
f = co.solve_corrector(g)
print("p=1 max|chi|", np.abs(f.chi).max(), "resid", f.residual,
      "dir_phi", f.dirichlet_phi, "pyth", f.pythagoras_error)

rep = co.effective_diffusivity(env, 3)
print("p=1 sigma_v^2", rep.sigma_v_sq, "E|X1|^2", rep.mean_square_step,
      "deficit", rep.deficit_max, "t1 resid", rep.residual_time_one,
      "pyth", rep.pythagoras_error)

# 2) d=1 ring closed form: increment over edge i ~ (1/mu_i) / sum(1/mu_j) * period
env1 = Environment(dim=1, p=0.8, seed=5, law=ConductanceLaw("pareto", (3.0,)))
g1 = periodize(env1, 6)
f1 = co.solve_corrector(g1)
mu = g1.edge_conductance
period = g1.period
want = period * (1.0 / mu) / (1.0 / mu).sum()
got = (f1.chi[g1.edge_v, 0] - f1.chi[g1.edge_u, 0]) + g1.edge_disp[:, 0]
print("ring increments err", np.abs(np.sort(got) - np.sort(want)).max(),
      "resid", f1.residual)

# 3) disordered d=2: full report + cross-solve + martingale
env2 = Environment(dim=2, p=0.7, seed=3, law=ConductanceLaw("pareto", (3.0,)))
g2 = periodize(env2, 5)
f2 = co.solve_corrector(g2)
print("d2 n_vertices", g2.n_vertices, "iters", f2.iterations,
      "resid", f2.residual, "gen pyth", f2.pythagoras_error)

table = co.time_one_table(g2)
print("table rows", len(table.prob), "deficit", table.deficit.max(),
      "t1 resid", table.residual(f2.chi))
chi_t1 = co.solve_corrector_time_one(table)
print("cross-solve max diff", np.abs(chi_t1 - f2.chi).max())

rep2 = co.effective_diffusivity(env2, 5)
print("d2 sigma_v^2", rep2.sigma_v_sq, "E|X1|^2", rep2.mean_square_step,
      "pyth", rep2.pythagoras_error)

mr = co.martingale_walk_check(g2, f2.chi, n_walks=60, n_steps=40, run_seed=77)
print("martingale z", mr.max_abs_z, "sites", mr.n_sites_tested,
      "coverage", mr.coverage)
mr0 = co.martingale_walk_check(g2, np.zeros_like(f2.chi), n_walks=60,
                               n_steps=40, run_seed=77)
print("control (chi=0) z", mr0.max_abs_z)

rows = co.sublinearity_scan(env2, [3, 5, 7])
for r in rows:
    print("sublin", r.radius, r.max_ratio, r.densities, r.axis_max_ratio)
