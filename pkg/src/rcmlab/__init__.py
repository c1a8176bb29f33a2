"""rcmlab: a random-walk laboratory for long-range random conductance models.

The model: sites of Z^d are open independently with probability p; open sites
are joined along coordinate axes to their nearest open neighbor in each
direction (edges may be long), and every edge carries an i.i.d. conductance
mu >= 1. The package samples these environments deterministically from a
counter-based hash, simulates the variable- and constant-speed random walks
on them, and measures the quantities that control their diffusive behavior:
chemical vs Euclidean metrics, isoperimetry and Poincare constants, heat
kernels, first-passage metrics, and the harmonic corrector with its
effective diffusivity.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
