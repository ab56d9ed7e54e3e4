"""Backend selection for the hot loops.

The compiled extension ``lpdvoretzky._kernels`` is used when it imports;
otherwise the NumPy fallback is used. Setting ``LPDVO_PURE_PYTHON=1``
forces the fallback (used by the parity tests and the benchmark).
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("LPDVO_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _fallback


def _c2d(P):
    return np.ascontiguousarray(P, dtype=np.float64)


def power_sums(P, c, q, backend=None):
    impl = _pick(backend)
    return impl.power_sums(_c2d(P), np.ascontiguousarray(c, dtype=np.float64), float(q))


def signed_powers(P, c, q, backend=None):
    impl = _pick(backend)
    return impl.signed_powers(_c2d(P), np.ascontiguousarray(c, dtype=np.float64), float(q))


def farthest_update(C, x, mind2, backend=None):
    impl = _pick(backend)
    return int(impl.farthest_update(C, np.ascontiguousarray(x, dtype=np.float64), mind2))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _fallback
    if backend == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.append("cython")
    except ImportError:  # pragma: no cover
        pass
    return names
