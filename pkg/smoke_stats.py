import numpy as np

from rcmlab.environment import ConductanceLaw, Environment
from rcmlab import stats as st
from rcmlab.walk import walk_ensemble

# calibration on synthetic Brownian input
ens = st.synthetic_gaussian_ensemble(4000, [5.0, 10.0, 20.0, 40.0], 2.0, seed=9)
est = st.estimate_diffusion_msd(ens)
print("synthetic cov[-1]\n", est.cov[-1])
print("sigma_sq", est.sigma_sq(), "+-", est.sigma_sq_stderr(),
      "plateau", est.plateau_stable, est.plateau_rel_change)
iso = st.isotropy_test(est)
print("iso", iso.passed, iso.offdiag_max_z, iso.diag_pair_max_z)
ks = st.gaussianity_panel(ens, sigma_sq=2.0, grid_indices=[3])
print("ks p", [round(r.pvalue, 4) for r in ks])

# anisotropic positive control
ens_bad = st.synthetic_gaussian_ensemble(4000, [5.0, 10.0], 1.0, seed=10)
pos = ens_bad.positions.copy()
pos[:, :, 1] *= np.sqrt(2.0)
import dataclasses
ens_bad = dataclasses.replace(ens_bad, positions=pos)
iso_bad = st.isotropy_test(st.estimate_diffusion_msd(ens_bad))
print("aniso control passed?", iso_bad.passed, iso_bad.diag_pair_max_z)

# p=1 closed form: diag (2,2), ratio = 1, LLN A(t)/t = 4 exactly
env = Environment(dim=2, p=1.0, seed=1, law=ConductanceLaw("constant", (1.0,)))
grid = [5.0, 10.0, 25.0, 50.0]
vs = walk_ensemble(env, 1500, grid, run_seed=21)
cs = walk_ensemble(env, 1500, grid, run_seed=22, csrw=True)
est1 = st.estimate_diffusion_msd(vs)
print("p=1 cov[-1]\n", est1.cov[-1])
rr = st.csrw_relation_test(vs, cs, env.law)
print("ratio", rr.ratio, (rr.ci_low, rr.ci_high), "sv", rr.sigma_v_sq,
      "sc", rr.sigma_c_sq)
lln = st.time_change_lln(vs, env.law)
print("lln rows", [(r.t, r.mean, r.target) for r in lln])

rep = st.clt_report(vs, cs, env.law, epsilons=(0.2,))
print("clt ks min p", rep.ks_min_pvalue, "eps rows",
      {e: [round(r.pvalue, 3) for r in rows] for e, rows in rep.eps_endpoint_ks.items()})
