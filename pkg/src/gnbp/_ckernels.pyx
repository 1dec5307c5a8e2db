# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep kernels. Same contract as ``gnbp._kernels_py``."""
from libc.math cimport exp, log, M_PI, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double LOG_2PI = log(2.0 * M_PI)


cdef inline Py_ssize_t _drop_last(long long[::1] z, long long[::1] counts,
                                  Py_ssize_t c, Py_ssize_t L) noexcept nogil:
    cdef Py_ssize_t j, last = L - 1
    cdef Py_ssize_t m = z.shape[0]
    if c != last:
        for j in range(m):
            if z[j] == last:
                z[j] = c
        counts[c] = counts[last]
    counts[last] = 0
    return L - 1


def prior_sweep(long long[::1] z, long long[::1] counts, Py_ssize_t n_clusters,
                long long[::1] order, const double[::1] u, double a, double w_new):
    cdef Py_ssize_t L = n_clusters
    cdef Py_ssize_t t, i, c, k, chosen
    cdef double total, target, acc
    with nogil:
        for t in range(order.shape[0]):
            i = order[t]
            c = z[i]
            counts[c] -= 1
            if counts[c] == 0:
                L = _drop_last(z, counts, c, L)
            total = 0.0
            for k in range(L):
                total += counts[k] - a
            total += w_new
            target = u[t] * total
            acc = 0.0
            chosen = L
            for k in range(L):
                acc += counts[k] - a
                if target < acc:
                    chosen = k
                    break
            if chosen == L:
                counts[L] = 0
                L += 1
            z[i] = chosen
            counts[chosen] += 1
    return L


def gauss_sweep(const double[:, ::1] x, long long[::1] z, long long[::1] counts,
                double[:, ::1] sums, Py_ssize_t n_clusters, long long[::1] order,
                const double[::1] u, double a, double w_new, double phi, double phi0,
                const double[::1] mu0):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t dim = x.shape[1]
    cdef Py_ssize_t L = n_clusters
    cdef Py_ssize_t t, i, c, k, d, last, chosen
    cdef long long n
    cdef double prec, var, d2, diff, v, top, total, target, acc
    cdef double log_w_new = log(w_new)
    cdef double var0 = 1.0 / phi0 + 1.0 / phi
    cdef double[::1] lw = np.empty(m + 1)
    with nogil:
        for t in range(order.shape[0]):
            i = order[t]
            c = z[i]
            counts[c] -= 1
            for d in range(dim):
                sums[c, d] -= x[i, d]
            if counts[c] == 0:
                last = L - 1
                if c != last:
                    for d in range(dim):
                        sums[c, d] = sums[last, d]
                for d in range(dim):
                    sums[last, d] = 0.0
                L = _drop_last(z, counts, c, L)
            top = -INFINITY
            for k in range(L):
                n = counts[k]
                prec = phi0 + n * phi
                var = 1.0 / phi + 1.0 / prec
                d2 = 0.0
                for d in range(dim):
                    diff = x[i, d] - (phi0 * mu0[d] + phi * sums[k, d]) / prec
                    d2 += diff * diff
                v = log(n - a) - 0.5 * dim * (LOG_2PI + log(var)) - 0.5 * d2 / var
                lw[k] = v
                if v > top:
                    top = v
            d2 = 0.0
            for d in range(dim):
                diff = x[i, d] - mu0[d]
                d2 += diff * diff
            v = log_w_new - 0.5 * dim * (LOG_2PI + log(var0)) - 0.5 * d2 / var0
            lw[L] = v
            if v > top:
                top = v
            total = 0.0
            for k in range(L + 1):
                lw[k] = exp(lw[k] - top)
                total += lw[k]
            target = u[t] * total
            acc = 0.0
            chosen = L
            for k in range(L):
                acc += lw[k]
                if target < acc:
                    chosen = k
                    break
            if chosen == L:
                counts[L] = 0
                for d in range(dim):
                    sums[L, d] = 0.0
                L += 1
            z[i] = chosen
            counts[chosen] += 1
            for d in range(dim):
                sums[chosen, d] += x[i, d]
    return L
