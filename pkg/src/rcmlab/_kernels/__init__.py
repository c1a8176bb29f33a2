"""Kernel backend selection.

The compiled extension (``_ckern``) accelerates the scalar-sequential hot
paths; ``_pykern`` is the reference implementation and always available. The
two are bit-identical by contract (tests/test_kernels_parity.py). Batch numpy
utilities live only in ``_pykern``: numpy integer hashing is already exact
and fast, so they have no compiled twin.

Set RCMLAB_FORCE_BACKEND=python (or =compiled) to override the default
preference for the compiled backend.
"""

import os

from . import _pykern

# Names whose implementations may be swapped for compiled twins.
_TWINNED = (
    "mix64",
    "hash_words",
    "u01",
    "site_open",
    "conductance_scalar",
    "walk_ensemble",
    "walk_path",
    "brandes_edge_flow",
)

_forced = os.environ.get("RCMLAB_FORCE_BACKEND")
_ck = None
if _forced != "python":
    try:
        from . import _ckern as _ck  # type: ignore[no-redef]
    except ImportError:
        _ck = None
        if _forced == "compiled":
            raise ImportError(
                "RCMLAB_FORCE_BACKEND=compiled but the extension is not built")

BACKEND = "compiled" if _ck is not None else "python"
_impl = _ck if _ck is not None else _pykern

for _name in _TWINNED:
    globals()[_name] = getattr(_impl, _name)

# Constants and numpy batch utilities (single implementation).
MASK64 = _pykern.MASK64
CH_SITE = _pykern.CH_SITE
CH_EDGE = _pykern.CH_EDGE
CH_WALK = _pykern.CH_WALK
CH_HOLD = _pykern.CH_HOLD
CH_JUMP = _pykern.CH_JUMP
LAW_CONSTANT = _pykern.LAW_CONSTANT
LAW_PARETO = _pykern.LAW_PARETO
LAW_SHIFTED_EXPONENTIAL = _pykern.LAW_SHIFTED_EXPONENTIAL
LAW_TWO_POINT = _pykern.LAW_TWO_POINT

law_transform = _pykern.law_transform
site_uniforms = _pykern.site_uniforms
open_mask_box = _pykern.open_mask_box
edge_uniforms = _pykern.edge_uniforms
conductance_batch = _pykern.conductance_batch
stream_uniforms = _pykern.stream_uniforms

python_backend = _pykern
compiled_backend = _ck
