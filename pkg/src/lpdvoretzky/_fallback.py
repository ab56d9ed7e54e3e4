"""Pure NumPy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _abspow(a, q):
    a = np.abs(a)
    if q == 1.0:
        return a
    if q == 2.0:
        return a * a
    if q == 3.0:
        return a * a * a
    if q == 4.0:
        a = a * a
        return a * a
    return np.power(a, q)


def power_sums(P, c, q):
    """Row-wise ``sum_j c[j] * |P[i, j]|**q`` (uncompensated BLAS dot)."""
    P = np.asarray(P, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != P.shape[1]:
        raise ValueError("mass vector length does not match projection columns")
    return _abspow(P, q) @ c


def signed_powers(P, c, q):
    """Elementwise ``c[j] * |P|**(q - 1) * sgn(P)`` with ``sgn(0) = 0``."""
    P = np.asarray(P, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != P.shape[1]:
        raise ValueError("mass vector length does not match projection columns")
    if q == 1.0:
        mag = np.ones_like(P)
    else:
        mag = _abspow(P, q - 1.0)
    return np.sign(P) * mag * c


def farthest_update(C, x, mind2):
    """Lower ``mind2[i]`` to ``|C[i] - x|^2`` in place; return the argmax."""
    d = np.sum((C - x) ** 2, axis=1)
    np.minimum(mind2, d, out=mind2)
    return int(np.argmax(mind2))
