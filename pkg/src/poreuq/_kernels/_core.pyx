# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sparse Krylov solve and truncated Gaussian kernel sums."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, floor, ceil, fabs

cnp.import_array()


cdef inline void _csr_matvec(const int[::1] indptr, const int[::1] indices,
                             const double[::1] data, const double[::1] x,
                             double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


def pcr_solve(int[::1] indptr, int[::1] indices, double[::1] data,
              double[::1] b, double[::1] inv_diag, double tol, Py_ssize_t maxiter):
    """Jacobi-preconditioned conjugate residual iteration for SPD ``A x = b``.

    Returns ``(x, iterations, history, converged)`` where ``history`` holds the
    preconditioned residual norm ``sqrt(r^T M^-1 r)`` after every iteration.
    """
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, it = 0
    cdef double bnorm, rnorm, zAz, zAz_new, alpha, beta, denom
    x_arr = np.zeros(n)
    r_arr = np.array(b, dtype=np.float64, copy=True)
    z_arr = np.empty(n)
    p_arr = np.empty(n)
    Ap_arr = np.empty(n)
    Az_arr = np.empty(n)
    q_arr = np.empty(n)
    cdef double[::1] x = x_arr
    cdef double[::1] r = r_arr
    cdef double[::1] z = z_arr
    cdef double[::1] p = p_arr
    cdef double[::1] Ap = Ap_arr
    cdef double[::1] Az = Az_arr
    cdef double[::1] q = q_arr
    history = []

    bnorm = sqrt(_dot(b, b))
    if bnorm == 0.0:
        return x_arr, 0, np.zeros(0), True

    for i in range(n):
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]
    _csr_matvec(indptr, indices, data, z, Az)
    for i in range(n):
        Ap[i] = Az[i]
    zAz = _dot(z, Az)
    rnorm = bnorm
    converged = False

    while it < maxiter:
        for i in range(n):
            q[i] = inv_diag[i] * Ap[i]
        denom = _dot(Ap, q)
        if denom <= 0.0 or zAz <= 0.0:
            break
        alpha = zAz / denom
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * Ap[i]
            z[i] -= alpha * q[i]
        it += 1
        history.append(sqrt(fabs(_dot(r, z))))
        rnorm = sqrt(_dot(r, r))
        if rnorm <= tol * bnorm:
            converged = True
            break
        _csr_matvec(indptr, indices, data, z, Az)
        zAz_new = _dot(z, Az)
        beta = zAz_new / zAz
        zAz = zAz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
            Ap[i] = Az[i] + beta * Ap[i]
    return x_arr, it, np.asarray(history, dtype=np.float64), converged


cdef inline void _window(double x, double g0, double dg, Py_ssize_t ng,
                         double reach, Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    cdef double a = ceil((x - reach - g0) / dg)
    cdef double c = floor((x + reach - g0) / dg)
    if a < 0:
        a = 0
    if c > ng - 1:
        c = ng - 1
    lo[0] = <Py_ssize_t>a
    hi[0] = <Py_ssize_t>c + 1


def gauss_sum_1d(double[::1] samples, double g0, double dg, Py_ssize_t ng,
                 double h, double cutoff):
    """Unnormalized sums ``sum_k exp(-(g_i - x_k)^2 / 2h^2)`` on a regular grid.

    Kernel contributions farther than ``cutoff * h`` are skipped.
    """
    out_arr = np.zeros(ng)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, i, lo, hi
    cdef double x, u, inv2h2 = 0.5 / (h * h), reach = cutoff * h
    with nogil:
        for k in range(samples.shape[0]):
            x = samples[k]
            _window(x, g0, dg, ng, reach, &lo, &hi)
            for i in range(lo, hi):
                u = g0 + i * dg - x
                out[i] += exp(-u * u * inv2h2)
    return out_arr


def gauss_sum_2d(double[::1] xs, double[::1] ys,
                 double gx0, double dgx, Py_ssize_t nx, double hx,
                 double gy0, double dgy, Py_ssize_t ny, double hy,
                 double cutoff):
    """Unnormalized product-kernel sums on a regular ``nx x ny`` grid."""
    out_arr = np.zeros((nx, ny))
    cdef double[:, ::1] out = out_arr
    wx_arr = np.empty(nx)
    wy_arr = np.empty(ny)
    cdef double[::1] wx = wx_arr
    cdef double[::1] wy = wy_arr
    cdef Py_ssize_t k, i, j, xlo, xhi, ylo, yhi
    cdef double x, y, u, w
    cdef double cx = 0.5 / (hx * hx), cy = 0.5 / (hy * hy)
    with nogil:
        for k in range(xs.shape[0]):
            x = xs[k]
            y = ys[k]
            _window(x, gx0, dgx, nx, cutoff * hx, &xlo, &xhi)
            _window(y, gy0, dgy, ny, cutoff * hy, &ylo, &yhi)
            if xlo >= xhi or ylo >= yhi:
                continue
            for j in range(ylo, yhi):
                u = gy0 + j * dgy - y
                wy[j] = exp(-u * u * cy)
            for i in range(xlo, xhi):
                u = gx0 + i * dgx - x
                w = exp(-u * u * cx)
                for j in range(ylo, yhi):
                    out[i, j] += w * wy[j]
    return out_arr
