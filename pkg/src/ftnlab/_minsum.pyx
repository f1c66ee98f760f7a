# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled normalized min-sum decoder (flooding schedule)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def minsum_decode(const double[:, ::1] llrs, const int[::1] check_ptr, const int[::1] edge_var,
                  const int[::1] var_ptr, const int[::1] var_edges, double alpha, int max_iter):
    cdef Py_ssize_t batch = llrs.shape[0], n = llrs.shape[1]
    cdef Py_ssize_t m = check_ptr.shape[0] - 1, n_edges = edge_var.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] hard_arr = np.zeros((batch, n), dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] conv_arr = np.zeros(batch, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] iter_arr = np.full(batch, max_iter, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] post_arr = np.array(llrs, dtype=np.float64)
    cdef unsigned char[:, ::1] hard = hard_arr
    cdef double[:, ::1] post = post_arr
    cdef double[::1] v2c = np.empty(n_edges)
    cdef double[::1] c2v = np.empty(n_edges)
    cdef Py_ssize_t b, c, e, v, j, arg
    cdef int it, neg_parity, ok
    cdef unsigned char syn
    cdef double mag, min1, min2, acc, val, sgn

    with nogil:
        for b in range(batch):
            for v in range(n):
                hard[b, v] = 1 if llrs[b, v] < 0 else 0
            for e in range(n_edges):
                v2c[e] = llrs[b, edge_var[e]]
            for it in range(1, max_iter + 1):
                # check-node update
                for c in range(m):
                    min1 = INFINITY
                    min2 = INFINITY
                    arg = -1
                    neg_parity = 0
                    for e in range(check_ptr[c], check_ptr[c + 1]):
                        mag = fabs(v2c[e])
                        if v2c[e] < 0:
                            neg_parity ^= 1
                        if mag < min1:
                            min2 = min1
                            min1 = mag
                            arg = e
                        elif mag < min2:
                            min2 = mag
                    for e in range(check_ptr[c], check_ptr[c + 1]):
                        val = min2 if e == arg else min1
                        sgn = -1.0 if ((v2c[e] < 0) != (neg_parity == 1)) else 1.0
                        c2v[e] = alpha * sgn * val
                # variable-node posterior and hard decision
                ok = 1
                for v in range(n):
                    acc = 0.0
                    for j in range(var_ptr[v], var_ptr[v + 1]):
                        acc = acc + c2v[var_edges[j]]
                    post[b, v] = llrs[b, v] + acc
                    hard[b, v] = 1 if post[b, v] < 0 else 0
                    if post[b, v] == 0:
                        ok = 0
                if ok:
                    for c in range(m):
                        syn = 0
                        for e in range(check_ptr[c], check_ptr[c + 1]):
                            syn ^= hard[b, edge_var[e]]
                        if syn:
                            ok = 0
                            break
                if ok:
                    conv_arr[b] = 1
                    iter_arr[b] = it
                    break
                for e in range(n_edges):
                    v2c[e] = post[b, edge_var[e]] - c2v[e]
    return hard_arr, conv_arr, iter_arr, post_arr
