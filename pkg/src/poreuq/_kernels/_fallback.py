"""Pure numpy versions of the compiled kernels (same signatures and results)."""

import numpy as np
import scipy.sparse as sp

_CHUNK = 1 << 15


def pcr_solve(indptr, indices, data, b, inv_diag, tol, maxiter):
    """Jacobi-preconditioned conjugate residual iteration for SPD ``A x = b``."""
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    x = np.zeros(n)
    bnorm = np.sqrt(b @ b)
    if bnorm == 0.0:
        return x, 0, np.zeros(0), True
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    Az = A @ z
    Ap = Az.copy()
    zAz = z @ Az
    history = []
    converged = False
    it = 0
    while it < maxiter:
        q = inv_diag * Ap
        denom = Ap @ q
        if denom <= 0.0 or zAz <= 0.0:
            break
        alpha = zAz / denom
        x += alpha * p
        r -= alpha * Ap
        z -= alpha * q
        it += 1
        history.append(np.sqrt(abs(r @ z)))
        if np.sqrt(r @ r) <= tol * bnorm:
            converged = True
            break
        Az = A @ z
        zAz_new = z @ Az
        beta = zAz_new / zAz
        zAz = zAz_new
        p = z + beta * p
        Ap = Az + beta * Ap
    return x, it, np.asarray(history, dtype=np.float64), converged


def _kernel_block(samples, grid, h, cutoff):
    u = (grid[:, None] - samples[None, :]) / h
    k = np.exp(-0.5 * u * u)
    k[np.abs(u) > cutoff] = 0.0
    return k


def gauss_sum_1d(samples, g0, dg, ng, h, cutoff):
    grid = g0 + np.arange(ng) * dg
    out = np.zeros(ng)
    for start in range(0, samples.shape[0], _CHUNK):
        out += _kernel_block(samples[start:start + _CHUNK], grid, h, cutoff).sum(axis=1)
    return out


def gauss_sum_2d(xs, ys, gx0, dgx, nx, hx, gy0, dgy, ny, hy, cutoff):
    gx = gx0 + np.arange(nx) * dgx
    gy = gy0 + np.arange(ny) * dgy
    out = np.zeros((nx, ny))
    # the product kernel sum is a matrix product of the two 1-D kernel blocks
    for start in range(0, xs.shape[0], _CHUNK):
        kx = _kernel_block(xs[start:start + _CHUNK], gx, hx, cutoff)
        ky = _kernel_block(ys[start:start + _CHUNK], gy, hy, cutoff)
        out += kx @ ky.T
    return out
