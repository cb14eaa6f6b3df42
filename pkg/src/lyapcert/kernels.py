"""Kernel backend selection.

The compiled extension ``_kernels`` is used when importable; otherwise, or
when ``LYAPCERT_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy implementations in ``_fallback`` are used.
"""

import os

from . import _fallback

_force_python = os.environ.get("LYAPCERT_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

schur_accumulate = _impl.schur_accumulate
fr_integrate = _impl.fr_integrate
fr_integrate_mid = _impl.fr_integrate_mid
rk4_integrate = _impl.rk4_integrate
tangent_rk4 = _impl.tangent_rk4
eval_system = _impl.eval_system
close_return = _impl.close_return

__all__ = [
    "BACKEND",
    "schur_accumulate",
    "fr_integrate",
    "fr_integrate_mid",
    "rk4_integrate",
    "tangent_rk4",
    "eval_system",
    "close_return",
]
