# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched weighted products for face and element block assembly."""

import numpy as np

cimport cython


def weighted_products(double[:, ::1] w, double[:, :, ::1] a, double[:, :, ::1] b):
    """out[e, i, j] = sum_q w[e, q] * a[e, q, i] * b[e, q, j]"""
    cdef Py_ssize_t ne = a.shape[0], nq = a.shape[1], m = a.shape[2], n = b.shape[2]
    if w.shape[0] != ne or b.shape[0] != ne or w.shape[1] != nq or b.shape[1] != nq:
        raise ValueError("shape mismatch")
    out = np.zeros((ne, m, n))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t e, q, i, j
    cdef double wa
    with nogil:
        for e in range(ne):
            for q in range(nq):
                for i in range(m):
                    wa = w[e, q] * a[e, q, i]
                    if wa == 0.0:
                        continue
                    for j in range(n):
                        o[e, i, j] += wa * b[e, q, j]
    return out


def weighted_gram(double[:, ::1] w, double[:, :, ::1] a):
    """Symmetric special case ``weighted_products(w, a, a)``; fills the upper
    triangle and mirrors it."""
    cdef Py_ssize_t ne = a.shape[0], nq = a.shape[1], m = a.shape[2]
    if w.shape[0] != ne or w.shape[1] != nq:
        raise ValueError("shape mismatch")
    out = np.zeros((ne, m, m))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t e, q, i, j
    cdef double wa
    with nogil:
        for e in range(ne):
            for q in range(nq):
                for i in range(m):
                    wa = w[e, q] * a[e, q, i]
                    if wa == 0.0:
                        continue
                    for j in range(i, m):
                        o[e, i, j] += wa * a[e, q, j]
            for i in range(m):
                for j in range(i + 1, m):
                    o[e, j, i] = o[e, i, j]
    return out
