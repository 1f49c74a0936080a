# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise kernels. ``_fallback`` holds the numpy equivalents."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, fabs

cnp.import_array()

# exp(-x) is exactly 0.0 in double precision past this argument
DEF UNDERFLOW = 746.0


def excitation_features(const double[::1] times, const cnp.int64_t[::1] types,
                        int num_types, const double[::1] centers, double sigma):
    """G[i, v, m] = sum over j < i with types[j] == v of kappa_m(times[i] - times[j])."""
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t nb = centers.shape[0]
    cdef Py_ssize_t i, j, m
    cdef double tau, d, arg, inv2s2 = 0.5 / (sigma * sigma)
    cdef double cmax = 0.0
    out = np.zeros((n, num_types, nb), dtype=np.float64)
    cdef double[:, :, ::1] g = out
    for m in range(nb):
        if centers[m] > cmax:
            cmax = centers[m]
    for i in range(n):
        for j in range(i - 1, -1, -1):
            tau = times[i] - times[j]
            d = tau - cmax
            # sorted times: every earlier j is at least this far from all centers
            if d > 0.0 and d * d * inv2s2 > UNDERFLOW:
                break
            for m in range(nb):
                d = tau - centers[m]
                arg = d * d * inv2s2
                if arg < UNDERFLOW:
                    g[i, types[j], m] += exp(-arg)
    return out


def sine_intensity(double t, const double[::1] times, const cnp.int64_t[::1] types,
                   const double[:, ::1] amplitude, const double[:, ::1] frequency,
                   const double[:, ::1] phase, const double[:, ::1] support_end,
                   bint stepped, double[::1] out):
    """Add the sine-like (or thresholded) excitation at time t into ``out``.

    ``phase`` holds pi * s_uv. Only history with times < t contributes.
    """
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t nu = out.shape[0]
    cdef Py_ssize_t j, u
    cdef long v
    cdef double lag, b, c
    for j in range(n):
        lag = t - times[j]
        if lag <= 0.0:
            continue
        v = types[j]
        for u in range(nu):
            b = amplitude[u, v]
            if b == 0.0 or lag > support_end[u, v]:
                continue
            c = cos(frequency[u, v] * lag - phase[u, v])
            if stepped:
                if c <= 0.0:
                    out[u] += b
            else:
                out[u] += b * (1.0 - c)
    return out
