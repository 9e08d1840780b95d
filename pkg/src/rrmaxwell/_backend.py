"""Select the compiled kernels when available, else the pure-Python fallback.

Set ``RRMAXWELL_BACKEND=python`` to force the fallback.
"""
import os

NAME = "python"
if os.environ.get("RRMAXWELL_BACKEND", "").lower() != "python":
    try:
        from . import _core as core

        NAME = "cython"
    except ImportError:
        from . import _pycore as core
else:
    from . import _pycore as core

collide3d_batch = core.collide3d_batch
collide1d_batch = core.collide1d_batch
empirical_cf = core.empirical_cf
radial_cf_defect = core.radial_cf_defect
