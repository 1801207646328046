# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the inference hot loops.

Semantics match ``_pykernels`` exactly; see that module for the contract.
"""

import numpy as np

from libc.math cimport exp, isfinite, log

NAME = "compiled"

cdef double C1 = 1.0 / 12.0
cdef double C2 = -1.0 / 120.0
cdef double C3 = 1.0 / 252.0
cdef double C4 = -1.0 / 240.0
cdef double C5 = 1.0 / 132.0
cdef double C6 = -691.0 / 32760.0
cdef double SHIFT = 10.0


cdef inline double _digamma1(double x) except? -1e308:
    cdef double acc = 0.0
    cdef double w, tail
    if not isfinite(x) or x <= 0.0:
        raise ValueError("digamma requires finite x > 0")
    while x < SHIFT:
        acc -= 1.0 / x
        x += 1.0
    w = 1.0 / (x * x)
    tail = w * (C1 + w * (C2 + w * (C3 + w * (C4 + w * (C5 + w * C6)))))
    return acc + log(x) - 0.5 / x - tail


def digamma(x):
    """Elementwise digamma for positive arguments, good to ~1e-13."""
    arr = np.asarray(x, dtype=np.float64)
    cdef bint scalar = arr.ndim == 0
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _digamma1(src[i])
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)


def label_mass(qz, y):
    """Soft label-given-class counts: out[j,k,l] = sum_i qz[i,k]*[y_ij == l]."""
    cdef double[:, ::1] q = np.ascontiguousarray(qz, dtype=np.float64)
    cdef int[:, ::1] obs = np.ascontiguousarray(y, dtype=np.int32)
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t k = q.shape[1]
    cdef Py_ssize_t h = obs.shape[1]
    out_arr = np.zeros((h, k, k))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef int l
    for i in range(n):
        for j in range(h):
            l = obs[i, j]
            if l >= 0:
                for c in range(k):
                    out[j, c, l] += q[i, c]
    return out_arr


def posterior_step(y, elog_pi, elog_v):
    """One mean-field posterior update over all instances.

    Returns the row-normalized posteriors and the summed log-normalizers.
    """
    cdef int[:, ::1] obs = np.ascontiguousarray(y, dtype=np.int32)
    cdef double[::1] epi = np.ascontiguousarray(elog_pi, dtype=np.float64)
    cdef double[:, :, ::1] ev = np.ascontiguousarray(elog_v, dtype=np.float64)
    cdef Py_ssize_t n = obs.shape[0]
    cdef Py_ssize_t h = obs.shape[1]
    cdef Py_ssize_t k = epi.shape[0]
    qz_arr = np.empty((n, k))
    cdef double[:, ::1] qz = qz_arr
    cdef double lse_sum = 0.0
    cdef double mx, total, lse, s
    cdef Py_ssize_t i, j, c
    cdef int l
    for i in range(n):
        mx = -1e308
        for c in range(k):
            s = epi[c]
            for j in range(h):
                l = obs[i, j]
                if l >= 0:
                    s += ev[j, c, l]
            qz[i, c] = s
            if s > mx:
                mx = s
        total = 0.0
        for c in range(k):
            qz[i, c] = exp(qz[i, c] - mx)
            total += qz[i, c]
        for c in range(k):
            qz[i, c] /= total
        lse = mx + log(total)
        lse_sum += lse
    return qz_arr, lse_sum
