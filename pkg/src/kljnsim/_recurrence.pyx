# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled linear-recurrence kernel: the hot loop of the transient solver.

Semantics identical to kljnsim._recurrence_py.recurrence_scan.
"""


def recurrence_scan(double[:, ::1] p, double[:, ::1] qu,
                    double[::1] x0, double[:, ::1] out):
    """Fill out[k] = p @ out[k-1] + qu[k-1], with out[0] = x0.

    p: (m, m); qu: (t-1, m); x0: (m,); out: (t, m), time-major.
    """
    cdef Py_ssize_t m = p.shape[0]
    cdef Py_ssize_t t = out.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    with nogil:
        for i in range(m):
            out[0, i] = x0[i]
        for k in range(1, t):
            for i in range(m):
                acc = qu[k - 1, i]
                for j in range(m):
                    acc += p[i, j] * out[k - 1, j]
                out[k, i] = acc
