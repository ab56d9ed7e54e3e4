# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Semantics must match ``_fallback.py`` exactly up to summation order; the
parity tests in ``tests/test_kernels.py`` hold both to the same values.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


cdef inline double _abspow(double t, double q, int iq) noexcept nogil:
    cdef double a = fabs(t)
    if iq == 1:
        return a
    elif iq == 2:
        return a * a
    elif iq == 3:
        return a * a * a
    elif iq == 4:
        a = a * a
        return a * a
    elif iq == 6:
        a = a * a
        return a * a * a
    elif iq == 8:
        a = a * a
        a = a * a
        return a * a
    if a == 0.0:
        return 0.0
    return pow(a, q)


cdef inline int _int_exponent(double q):
    if q == 1.0 or q == 2.0 or q == 3.0 or q == 4.0 or q == 6.0 or q == 8.0:
        return <int>q
    return 0


def power_sums(const double[:, ::1] P, const double[::1] c, double q):
    """Row-wise ``sum_j c[j] * |P[i, j]|**q`` with Neumaier summation."""
    cdef Py_ssize_t rows = P.shape[0], cols = P.shape[1]
    if c.shape[0] != cols:
        raise ValueError("mass vector length does not match projection columns")
    out = np.empty(rows, dtype=np.float64)
    cdef double[::1] res = out
    cdef int iq = _int_exponent(q)
    cdef Py_ssize_t i, j
    cdef double s, comp, term, tmp
    with nogil:
        for i in range(rows):
            s = 0.0
            comp = 0.0
            for j in range(cols):
                term = c[j] * _abspow(P[i, j], q, iq)
                tmp = s + term
                if fabs(s) >= fabs(term):
                    comp = comp + ((s - tmp) + term)
                else:
                    comp = comp + ((term - tmp) + s)
                s = tmp
            res[i] = s + comp
    return out


def signed_powers(const double[:, ::1] P, const double[::1] c, double q):
    """Elementwise ``c[j] * |P|**(q - 1) * sgn(P)`` with ``sgn(0) = 0``."""
    cdef Py_ssize_t rows = P.shape[0], cols = P.shape[1]
    if c.shape[0] != cols:
        raise ValueError("mass vector length does not match projection columns")
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double qm1 = q - 1.0
    cdef int iq = _int_exponent(qm1)
    cdef Py_ssize_t i, j
    cdef double t, v
    with nogil:
        for i in range(rows):
            for j in range(cols):
                t = P[i, j]
                if t == 0.0:
                    res[i, j] = 0.0
                    continue
                if qm1 == 0.0:
                    v = 1.0
                else:
                    v = _abspow(t, qm1, iq)
                if t < 0.0:
                    v = -v
                res[i, j] = c[j] * v
    return out


def farthest_update(const double[:, ::1] C, const double[::1] x, double[::1] mind2):
    """Lower ``mind2[i]`` to ``|C[i] - x|^2`` where smaller; return the argmax.

    Ties resolve to the lowest index.
    """
    cdef Py_ssize_t rows = C.shape[0], k = C.shape[1]
    if x.shape[0] != k or mind2.shape[0] != rows:
        raise ValueError("shape mismatch")
    cdef Py_ssize_t i, j, best = 0
    cdef double d, diff, bestval = -1.0
    with nogil:
        for i in range(rows):
            d = 0.0
            for j in range(k):
                diff = C[i, j] - x[j]
                d = d + diff * diff
            if d < mind2[i]:
                mind2[i] = d
            if mind2[i] > bestval:
                bestval = mind2[i]
                best = i
    return best
