"""Bundled run sizes: `desk` finishes over coffee, `night` earns its name.

Experiment parameter dictionaries are versioned so persisted manifests can
say exactly which grid produced them. Values here are the single source of
defaults for the CLI and the experiment runners.
"""

from __future__ import annotations

import copy

__all__ = ["PRESETS", "EXPERIMENTS", "preset_params", "default_environment"]

EXPERIMENTS = ("env-audit", "metrics", "iso", "fpp", "kernel", "corrector",
               "clt", "full-suite")

# shared probe-grid version tag; bump on any change to the numbers below
GRID_VERSION = 1

_DESK = {
    "env-audit": {
        "n_samples": 100_000,
        "n_holding_sites": 3,
        "box_radius": 40,
        "alpha": 1e-3,
    },
    "metrics": {
        "n_envs": 200,
        "n_values": list(range(2, 11)),
        "n_origins": 30,
        "box_ratio": 5.0,
        "hop_ratio": 2.0,
    },
    "iso": {
        "seeds": list(range(40)),
        "n_values": [2, 4, 6, 8, 12, 16],
        "poincare_n": [1, 2, 3, 4],
        "density_n": 24,
    },
    "fpp": {
        "n_envs": 30,
        "ratios": [0.25, 0.5, 0.75, 1.0, 2.0],
        "n_values": [2, 4, 6, 8],
        "box_radius": 48,
    },
    "kernel": {
        "torus_radius": 32,
        "t_values": [4.0, 8.0, 16.0, 32.0, 64.0],
        "mc_t": 4.0,
        "mc_walks": 100_000,
        "probe_radius": 10,
    },
    "corrector": {
        "radii": [4, 6, 8],
        "sublinearity_radii": [3, 5, 7, 9],
        "epsilons": [0.05, 0.1, 0.2],
    },
    "clt": {
        "n_walks": 10_000,
        "t_grid": [5.0, 10.0, 25.0, 50.0, 100.0],
        "epsilons": [0.1],
        "csrw": True,
        "trend_grid": [20.0, 50.0, 100.0, 200.0],
        "trend_walks": 4000,
    },
}

_NIGHT = copy.deepcopy(_DESK)
_NIGHT["env-audit"]["n_samples"] = 1_000_000
_NIGHT["metrics"].update(n_envs=1000, n_origins=100)
_NIGHT["iso"].update(seeds=list(range(200)), n_values=[2, 4, 6, 8, 12, 16, 24])
_NIGHT["fpp"].update(n_envs=200, n_values=[2, 4, 6, 8, 12])
_NIGHT["kernel"].update(torus_radius=64, mc_walks=1_000_000)
_NIGHT["corrector"].update(radii=[4, 6, 8, 12, 16],
                           sublinearity_radii=[3, 5, 7, 9, 12, 16])
_NIGHT["clt"].update(n_walks=100_000, trend_walks=20_000,
                     t_grid=[5.0, 10.0, 25.0, 50.0, 100.0, 200.0])

PRESETS = {"desk": _DESK, "night": _NIGHT}


def preset_params(preset: str, experiment: str) -> dict:
    """Copy of the parameter dict for one experiment under one preset."""
    try:
        per_exp = PRESETS[preset]
    except KeyError:
        raise KeyError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
    if experiment == "full-suite":
        return {}
    try:
        params = per_exp[experiment]
    except KeyError:
        raise KeyError(
            f"unknown experiment {experiment!r}; have {EXPERIMENTS}")
    out = copy.deepcopy(params)
    out["grid_version"] = GRID_VERSION
    return out


def default_environment() -> dict:
    """Environment knobs used when the CLI is given none."""
    return {"dim": 2, "p": 0.7, "seed": 1,
            "law": {"kind": "pareto", "shape": 3.0}}
