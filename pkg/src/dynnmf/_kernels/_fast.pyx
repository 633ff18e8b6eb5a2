# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled family kernels: fused single-pass loglik/score/curvature.

Mirrors ``_ref`` exactly; parity is enforced by tests/test_kernels.py.
"""

from libc.math cimport log, INFINITY

import numpy as np

BACKEND = "cython"


def poisson_stats(theta, y, bint derivs=False):
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64).ravel()
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef Py_ssize_t n = th.shape[0], i
    cdef double ll = 0.0, t, v
    cdef double[::1] s, h
    if not derivs:
        for i in range(n):
            t = th[i]
            v = yy[i]
            if t < 0.0 or (t == 0.0 and v > 0.0):
                return -INFINITY, None, None
            if v > 0.0:
                ll += v * log(t)
            ll -= t
        return ll, None, None
    score = np.empty(n)
    curv = np.empty(n)
    s = score
    h = curv
    for i in range(n):
        t = th[i]
        v = yy[i]
        if t < 0.0 or (t == 0.0 and v > 0.0):
            return -INFINITY, None, None
        if v > 0.0:
            ll += v * log(t)
            s[i] = v / t - 1.0
            h[i] = -v / (t * t)
        else:
            s[i] = -1.0
            h[i] = 0.0
        ll -= t
    return ll, score, curv


def exponential_stats(theta, y, bint derivs=False):
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64).ravel()
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef Py_ssize_t n = th.shape[0], i
    cdef double ll = 0.0, t, inv
    cdef double[::1] s, h
    if not derivs:
        for i in range(n):
            t = th[i]
            if t <= 0.0:
                return -INFINITY, None, None
            ll += log(t) - t * yy[i]
        return ll, None, None
    score = np.empty(n)
    curv = np.empty(n)
    s = score
    h = curv
    for i in range(n):
        t = th[i]
        if t <= 0.0:
            return -INFINITY, None, None
        inv = 1.0 / t
        ll += log(t) - t * yy[i]
        s[i] = inv - yy[i]
        h[i] = -inv * inv
    return ll, score, curv
