# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def thomas(lower, diag, upper, rhs):
    cdef const double[::1] a = np.ascontiguousarray(lower, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(upper, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i
    cdef double denom
    cp_arr = np.empty(n)
    x_arr = np.empty(n)
    cdef double[::1] cp = cp_arr
    cdef double[::1] x = x_arr
    if b[0] == 0.0:
        raise ZeroDivisionError("zero pivot in row 0")
    cp[0] = c[0] / b[0] if n > 1 else 0.0
    x[0] = d[0] / b[0]
    for i in range(1, n):
        denom = b[i] - a[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError(f"zero pivot in row {i}")
        cp[i] = c[i] / denom if i < n - 1 else 0.0
        x[i] = (d[i] - a[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x_arr


def second_difference(u, double h):
    arr = np.ascontiguousarray(u, dtype=np.float64)
    shape = arr.shape
    flat = arr.reshape(-1, shape[len(shape) - 1])
    cdef const double[:, ::1] v = flat
    cdef Py_ssize_t rows = v.shape[0], n = v.shape[1]
    out_arr = np.empty((rows, n))
    cdef double[:, ::1] out = out_arr
    cdef double inv = 1.0 / (h * h)
    cdef Py_ssize_t r, i
    cdef double s
    for r in range(rows):
        for i in range(n):
            s = -2.0 * v[r, i]
            if i > 0:
                s += v[r, i - 1]
            if i < n - 1:
                s += v[r, i + 1]
            out[r, i] = s * inv
    return out_arr.reshape(shape)


def laplacian5(u, double h):
    cdef const double[:, ::1] v = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t ny = v.shape[0], nx = v.shape[1]
    out_arr = np.empty((ny, nx))
    cdef double[:, ::1] out = out_arr
    cdef double inv = 1.0 / (h * h)
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(ny):
        for j in range(nx):
            s = -4.0 * v[i, j]
            if i > 0:
                s += v[i - 1, j]
            if i < ny - 1:
                s += v[i + 1, j]
            if j > 0:
                s += v[i, j - 1]
            if j < nx - 1:
                s += v[i, j + 1]
            out[i, j] = s * inv
    return out_arr
