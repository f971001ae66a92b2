"""Hot kernels: compiled extension when importable, pure Python otherwise.

Set ``BOUNDSOL_KERNELS=python`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("BOUNDSOL_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

thomas = _impl.thomas
second_difference = _impl.second_difference
laplacian5 = _impl.laplacian5

__all__ = ["BACKEND", "thomas", "second_difference", "laplacian5"]
