"""Ensemble statistics: diffusion matrices, isotropy, Gaussianity, the
CSRW/VSRW diffusion-constant relation, and the conductance-clock LLN.

Every report keeps its raw statistics next to the pass/fail verdicts so
thresholds can be revisited without rerunning the simulations. Verdicts
use 3-sigma z-tests and a 1e-3 significance floor for KS p-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .environment import ConductanceLaw
from .errors import ConfigError
from .walk import EnsembleResult

__all__ = [
    "DiffusionEstimate", "estimate_diffusion_msd",
    "IsotropyReport", "isotropy_test",
    "KsRow", "gaussianity_ks", "gaussianity_panel",
    "RatioReport", "csrw_relation_test",
    "LlnRow", "time_change_lln",
    "TrendRow", "variance_trend", "degenerate_csrw_probe",
    "CltReport", "clt_report",
    "synthetic_gaussian_ensemble",
]

SIGNIFICANCE = 1e-3
Z_PASS = 3.0


def _z_value(confidence: float) -> float:
    return float(sps.norm.ppf(0.5 * (1.0 + confidence)))


@dataclass(frozen=True)
class DiffusionEstimate:
    """Cov(X_t)/t across a time grid, with per-entry confidence intervals.

    `mode` records the sampling design: "quenched" fixes one environment
    and varies walk noise, "annealed" redraws the environment per walk.
    """

    mode: str
    t_grid: np.ndarray          # (G,)
    cov: np.ndarray             # (G, d, d)
    ci_half: np.ndarray         # (G, d, d)
    n_walks: int
    n_environments: int
    confidence: float
    plateau_rel_change: float   # trace change between the two largest times
    plateau_stable: bool

    @property
    def dim(self) -> int:
        return self.cov.shape[-1]

    def sigma_sq(self, grid_index: int = -1) -> float:
        """Scalar diffusion constant: mean diagonal entry at one grid time."""
        return float(np.trace(self.cov[grid_index]) / self.dim)

    def sigma_sq_stderr(self, grid_index: int = -1) -> float:
        z = _z_value(self.confidence)
        halves = np.diagonal(self.ci_half[grid_index])
        # diagonal entries are averaged; their estimators are near-independent
        return float(np.sqrt((halves ** 2).sum()) / (self.dim * z))


def _cov_ci_half(cov_t: np.ndarray, n: int, z: float) -> np.ndarray:
    """Normal-approximation half-widths for sample covariance entries:
    Var(s_jk) ~ (s_jj s_kk + s_jk^2) / (n - 1)."""
    d = np.diag(cov_t)
    var = (np.outer(d, d) + cov_t ** 2) / max(n - 1, 1)
    return z * np.sqrt(var)


def estimate_diffusion_msd(ensemble: EnsembleResult,
                           confidence: float = 0.95,
                           plateau_tolerance: float = 0.1) -> DiffusionEstimate:
    """Empirical Cov(X_t)/t per grid time, centred at the sample mean.

    Plateau detection compares the trace at the two largest grid times;
    diffusive behaviour means the normalized covariance has stopped moving.
    """
    t_grid = ensemble.t_grid
    if len(t_grid) < 2:
        raise ConfigError("need at least two grid times to assess a plateau")
    if t_grid[-1] <= 0:
        raise ConfigError("horizon too short: largest grid time must be > 0")
    n = ensemble.n_walks
    if n < 2:
        raise ConfigError("need at least two walks")
    z = _z_value(confidence)
    g = len(t_grid)
    d = ensemble.positions.shape[2]
    cov = np.empty((g, d, d))
    ci = np.empty((g, d, d))
    for i in range(g):
        x = ensemble.positions[:, i, :].astype(np.float64)
        c = np.cov(x, rowvar=False, ddof=1).reshape(d, d) / t_grid[i]
        cov[i] = 0.5 * (c + c.T)
        ci[i] = _cov_ci_half(cov[i], n, z)
    tr_prev = float(np.trace(cov[-2]))
    tr_last = float(np.trace(cov[-1]))
    rel = abs(tr_last - tr_prev) / max(abs(tr_last), 1e-300)
    return DiffusionEstimate(
        mode="annealed" if ensemble.fresh_env_per_walk else "quenched",
        t_grid=t_grid, cov=cov, ci_half=ci, n_walks=n,
        n_environments=n if ensemble.fresh_env_per_walk else 1,
        confidence=confidence, plateau_rel_change=rel,
        plateau_stable=rel <= plateau_tolerance)


@dataclass(frozen=True)
class IsotropyReport:
    offdiag_max_z: float
    diag_pair_max_z: float
    passed: bool
    level: float
    grid_index: int


def isotropy_test(estimate: DiffusionEstimate, grid_index: int = -1,
                  level: float = Z_PASS) -> IsotropyReport:
    """Check Cov(X_t)/t against a scalar matrix at one grid time."""
    if estimate.dim < 2:
        raise ValueError("isotropy needs d >= 2")
    cov = estimate.cov[grid_index]
    z_half = _z_value(estimate.confidence)
    se = estimate.ci_half[grid_index] / z_half
    d = estimate.dim
    off_z = 0.0
    pair_z = 0.0
    for j in range(d):
        for k in range(j + 1, d):
            off_z = max(off_z, abs(cov[j, k]) / max(se[j, k], 1e-300))
            denom = math.hypot(se[j, j], se[k, k])
            pair_z = max(pair_z, abs(cov[j, j] - cov[k, k]) / max(denom, 1e-300))
    return IsotropyReport(offdiag_max_z=off_z, diag_pair_max_z=pair_z,
                          passed=(off_z <= level and pair_z <= level),
                          level=level, grid_index=grid_index)


@dataclass(frozen=True)
class KsRow:
    t: float
    coordinate: int
    statistic: float
    pvalue: float


def _lattice_ks(values: np.ndarray, mean: float, scale: float,
                step: float) -> tuple[float, float]:
    """Two-sided KS of step-lattice samples vs the cell-integrated normal.

    The empirical and reference CDFs are compared at both sides of every
    atom; feeding lattice data to a continuous KS instead inflates the
    statistic by up to the largest atom mass.
    """
    n = values.size
    u, counts = np.unique(values, return_counts=True)
    emp_hi = np.cumsum(counts) / n
    emp_lo = emp_hi - counts / n
    ref_hi = sps.norm.cdf((u + 0.5 * step - mean) / scale)
    ref_lo = sps.norm.cdf((u - 0.5 * step - mean) / scale)
    d = max(np.abs(emp_hi - ref_hi).max(), np.abs(emp_lo - ref_lo).max())
    return float(d), float(sps.kstwobign.sf(d * math.sqrt(n)))


def gaussianity_ks(samples: np.ndarray, sigma_sq: float, t: float,
                   lattice_step: float = 0.0,
                   center: bool = False) -> list[KsRow]:
    """Per-coordinate KS distance of X_t samples against Normal(0, sigma_sq*t).

    lattice_step > 0 declares the samples supported on a lattice of that
    spacing and switches to the atom-level statistic. center subtracts the
    per-coordinate sample mean first (a shape-only test; quenched runs have
    an environment-specific mean displacement).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.ndim != 2:
        raise ValueError("samples must be (n, d)")
    scale = math.sqrt(sigma_sq * t)
    rows = []
    for a in range(samples.shape[1]):
        x = samples[:, a]
        mean = float(x.mean()) if center else 0.0
        if lattice_step > 0.0:
            stat, pvalue = _lattice_ks(x, mean, scale, lattice_step)
        else:
            res = sps.kstest(x, "norm", args=(mean, scale))
            stat, pvalue = float(res.statistic), float(res.pvalue)
        rows.append(KsRow(t=float(t), coordinate=a,
                          statistic=stat, pvalue=pvalue))
    return rows


def gaussianity_panel(ensemble: EnsembleResult, sigma_sq: float | None = None,
                      grid_indices=None, lattice_step: float = 0.0,
                      center: bool = False) -> list[KsRow]:
    """KS rows across several grid times; sigma_sq defaults to the plug-in
    estimate at the largest grid time."""
    if sigma_sq is None:
        sigma_sq = estimate_diffusion_msd(ensemble).sigma_sq()
    if grid_indices is None:
        grid_indices = range(len(ensemble.t_grid))
    rows: list[KsRow] = []
    for i in grid_indices:
        x = ensemble.positions[:, i, :].astype(np.float64)
        rows.extend(gaussianity_ks(x, sigma_sq, float(ensemble.t_grid[i]),
                                   lattice_step=lattice_step, center=center))
    return rows


@dataclass(frozen=True)
class RatioReport:
    """sigma_c^2 * (2 d E mu) / sigma_v^2, which the time change makes 1."""

    ratio: float
    ci_low: float
    ci_high: float
    sigma_v_sq: float
    sigma_c_sq: float
    mu_mean: float
    dim: int
    confidence: float

    @property
    def contains_one(self) -> bool:
        return self.ci_low <= 1.0 <= self.ci_high


def csrw_relation_test(vsrw: EnsembleResult, csrw: EnsembleResult,
                       law: ConductanceLaw,
                       confidence: float = 0.95) -> RatioReport:
    if vsrw.kind != "vsrw" or csrw.kind != "csrw":
        raise ValueError("pass the variable-speed ensemble first, constant-speed second")
    mu = law.mean()
    if not math.isfinite(mu):
        raise ValueError("law has infinite mean; use degenerate_csrw_probe")
    d = vsrw.positions.shape[2]
    est_v = estimate_diffusion_msd(vsrw, confidence)
    est_c = estimate_diffusion_msd(csrw, confidence)
    sv, sv_se = est_v.sigma_sq(), est_v.sigma_sq_stderr()
    sc, sc_se = est_c.sigma_sq(), est_c.sigma_sq_stderr()
    ratio = sc * (2 * d * mu) / sv
    rel = math.hypot(sv_se / sv, sc_se / sc)
    z = _z_value(confidence)
    return RatioReport(ratio=ratio, ci_low=ratio * (1 - z * rel),
                       ci_high=ratio * (1 + z * rel), sigma_v_sq=sv,
                       sigma_c_sq=sc, mu_mean=mu, dim=d, confidence=confidence)


@dataclass(frozen=True)
class LlnRow:
    t: float
    mean: float                 # average A(t)/t over walks
    ci_half: float
    target: float               # 2 d E mu, inf when the law has no mean


def time_change_lln(vsrw: EnsembleResult, law: ConductanceLaw,
                    confidence: float = 0.95) -> list[LlnRow]:
    """A(t)/t per grid time; ergodicity drives it to 2 d E mu."""
    if vsrw.kind != "vsrw":
        raise ValueError("the conductance clock belongs to the variable-speed walk")
    d = vsrw.positions.shape[2]
    target = 2 * d * law.mean()
    z = _z_value(confidence)
    rows = []
    for i, t in enumerate(vsrw.t_grid):
        if t <= 0:
            continue
        vals = vsrw.clock[:, i] / t
        rows.append(LlnRow(t=float(t), mean=float(vals.mean()),
                           ci_half=float(z * vals.std(ddof=1)
                                         / math.sqrt(len(vals))),
                           target=float(target)))
    return rows


@dataclass(frozen=True)
class TrendRow:
    t: float
    var_over_t: float           # mean per-coordinate variance / t
    ci_half: float


def variance_trend(ensemble: EnsembleResult,
                   confidence: float = 0.95) -> list[TrendRow]:
    """Var(X_t)/t (averaged over coordinates) across the grid, with CIs."""
    est = estimate_diffusion_msd(ensemble, confidence)
    rows = []
    for i, t in enumerate(ensemble.t_grid):
        rows.append(TrendRow(t=float(t), var_over_t=est.sigma_sq(i),
                             ci_half=est.sigma_sq_stderr(i) * _z_value(confidence)))
    return rows


@dataclass(frozen=True)
class DegenerateProbe:
    rows: list[TrendRow]
    first_over_last: float      # > 1 when Var/t is shrinking
    decreasing: bool


def degenerate_csrw_probe(ensemble: EnsembleResult,
                          confidence: float = 0.95) -> DegenerateProbe:
    """Trend of Var(X_t)/t across a decade of t.

    For a constant-speed walk under a heavy-tailed law (no conductance mean)
    the ratio drifts to zero; a finite-mean law run through the same probe
    stays flat, which is the negative control.
    """
    rows = variance_trend(ensemble, confidence)
    if len(rows) < 2:
        raise ConfigError("need at least two grid times")
    ratio = rows[0].var_over_t / max(rows[-1].var_over_t, 1e-300)
    return DegenerateProbe(rows=rows, first_over_last=ratio,
                           decreasing=ratio > 1.0)


@dataclass(frozen=True)
class CltReport:
    """One-stop panel for the invariance-principle checks."""

    estimate: DiffusionEstimate
    isotropy: IsotropyReport
    ks_rows: list[KsRow]
    ratio: RatioReport | None
    eps_endpoint_ks: dict[float, list[KsRow]] = field(default_factory=dict)

    @property
    def ks_min_pvalue(self) -> float:
        return min((r.pvalue for r in self.ks_rows), default=float("nan"))


def clt_report(vsrw: EnsembleResult, csrw: EnsembleResult | None,
               law: ConductanceLaw, epsilons=(),
               confidence: float = 0.95, lattice_step: float = 0.0,
               center: bool = False) -> CltReport:
    """Assemble estimate, isotropy, KS panel, and (optionally) the
    constant-speed ratio; per-epsilon rows test eps * X_{1/eps^2} against
    Normal(0, sigma^2) using the grid time nearest 1/eps^2."""
    est = estimate_diffusion_msd(vsrw, confidence)
    iso = isotropy_test(est)
    sigma = est.sigma_sq()
    ks = gaussianity_panel(vsrw, sigma_sq=sigma,
                           grid_indices=[len(vsrw.t_grid) - 1],
                           lattice_step=lattice_step, center=center)
    ratio = None
    if csrw is not None:
        ratio = csrw_relation_test(vsrw, csrw, law, confidence)
    eps_rows: dict[float, list[KsRow]] = {}
    for eps in epsilons:
        want = eps ** -2
        i = int(np.argmin(np.abs(vsrw.t_grid - want)))
        t = float(vsrw.t_grid[i])
        pts = eps * vsrw.positions[:, i, :].astype(np.float64)
        eps_rows[float(eps)] = gaussianity_ks(
            pts, sigma * eps ** 2, t,
            lattice_step=lattice_step * eps, center=center)
    return CltReport(estimate=est, isotropy=iso, ks_rows=ks, ratio=ratio,
                     eps_endpoint_ks=eps_rows)


def synthetic_gaussian_ensemble(n_walks: int, t_grid, sigma_sq: float,
                                seed: int, dim: int = 2) -> EnsembleResult:
    """Brownian stand-in ensemble for calibrating the estimators.

    Gaussian increments between grid times with Var = sigma_sq * dt per
    coordinate; the clock runs at exactly 2 * dim so the LLN sees a
    constant-law target. Positions stay float (no lattice rounding), which
    is what the calibration contract wants.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    rng = np.random.default_rng(seed)
    dts = np.diff(np.concatenate([[0.0], t_grid]))
    inc = rng.normal(size=(n_walks, len(t_grid), dim))
    inc *= np.sqrt(sigma_sq * dts)[None, :, None]
    positions = np.cumsum(inc, axis=1)
    clock = np.broadcast_to(2.0 * dim * t_grid, (n_walks, len(t_grid))).copy()
    return EnsembleResult(kind="vsrw", t_grid=t_grid, positions=positions,
                          clock=clock, events=np.zeros(n_walks, dtype=np.int64),
                          env=None, run_seed=int(seed), fresh_env_per_walk=False)
