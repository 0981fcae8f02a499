"""Kernel selection: the compiled extension when importable, else the numpy fallback.

Set ``TERRAIN_SYNTH_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("TERRAIN_SYNTH_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


def cpre(env_ptr, ch_ptr, succ, target):
    out = _impl.cpre(np.ascontiguousarray(env_ptr, dtype=np.int32),
                     np.ascontiguousarray(ch_ptr, dtype=np.int32),
                     np.ascontiguousarray(succ, dtype=np.int32),
                     np.ascontiguousarray(target, dtype=np.uint8))
    return np.asarray(out, dtype=bool)


def clip_convex(subject, clip):
    return _impl.clip_convex(np.ascontiguousarray(subject, dtype=float),
                             np.ascontiguousarray(clip, dtype=float))


def polygon_area(pts):
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    return float(_impl.polygon_area(pts))
