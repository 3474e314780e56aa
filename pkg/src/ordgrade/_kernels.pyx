# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, pow
from libc.stdint cimport uint64_t

cnp.import_array()

DEF MAXC = 64

cdef uint64_t FNV_OFFSET = 14695981039346656037ULL
cdef uint64_t FNV_PRIME = 1099511628211ULL


def emd_loss_grad(logits, gold, double p_order, double alpha, double scale,
                  double floor, bint want_grad):
    cdef double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef long long[::1] g = np.ascontiguousarray(gold, dtype=np.int64)
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t c = z.shape[1]
    if c > MAXC:
        raise ValueError("too many classes for compiled kernel")
    loss_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] loss = loss_arr
    grad_arr = None
    cdef double[:, ::1] grad
    if want_grad:
        grad_arr = np.empty((n, c), dtype=np.float64)
        grad = grad_arr

    cdef double q[MAXC]
    cdef double d[MAXC]
    cdef double gq[MAXC]
    cdef Py_ssize_t s, i
    cdef double m, tot, x, y, ad, acc, outer, inner, sgn, dot, run
    for s in range(n):
        m = z[s, 0]
        for i in range(1, c):
            if z[s, i] > m:
                m = z[s, i]
        tot = 0.0
        for i in range(c):
            q[i] = exp(z[s, i] - m)
            tot += q[i]
        x = 0.0
        acc = 0.0
        for i in range(c):
            q[i] = q[i] / tot
            x += q[i]
            y = 1.0 if i >= g[s] else 0.0
            d[i] = x - y if i < c - 1 else 0.0
            acc += pow(fabs(d[i]), p_order)
        loss[s] = scale * pow(acc, alpha / p_order)
        if not want_grad:
            continue
        outer = scale * alpha * pow(acc, alpha / p_order - 1.0) if acc > 0.0 else 0.0
        run = 0.0
        for i in range(c - 1, -1, -1):
            ad = fabs(d[i])
            if ad > 0.0:
                inner = pow(ad if ad > floor else floor, p_order - 1.0)
                sgn = 1.0 if d[i] > 0.0 else -1.0
                run += outer * inner * sgn
            gq[i] = run
        dot = 0.0
        for i in range(c):
            dot += q[i] * gq[i]
        for i in range(c):
            grad[s, i] = q[i] * (gq[i] - dot)
    return loss_arr, grad_arr


def kendall_counts(x, y):
    cdef double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef long long s = 0, tx = 0, ty = 0
    cdef double dx, dy
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = a[j] - a[i]
            dy = b[j] - b[i]
            if dx == 0.0:
                tx += 1
            if dy == 0.0:
                ty += 1
            if dx != 0.0 and dy != 0.0:
                if (dx > 0.0) == (dy > 0.0):
                    s += 1
                else:
                    s -= 1
    return int(s), int(tx), int(ty)


cdef inline uint64_t _fnv1a64(const unsigned char[:] data) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t k
    for k in range(data.shape[0]):
        h ^= data[k]
        h *= FNV_PRIME
    return h


def fnv1a64(data):
    return int(_fnv1a64(data))


def hash_tokens(tokens, out):
    cdef double[::1] acc = out
    cdef uint64_t dim = acc.shape[0]
    cdef uint64_t h
    cdef bytes tok
    for tok in tokens:
        h = _fnv1a64(tok)
        if h >> 63:
            acc[h % dim] -= 1.0
        else:
            acc[h % dim] += 1.0
