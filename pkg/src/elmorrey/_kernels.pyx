# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Same signatures and results as ``_kernels_py``."""

import numpy as np

from libc.math cimport sqrt


def shell_sums(const double[:, :, ::1] values, double ox, double oy, double oz,
               double h, double[::1] radii, double cx, double cy, double cz):
    """Ball sums of ``values`` around ``(cx, cy, cz)`` for every radius.

    Node (i, j, k) sits at ``(ox + i h, oy + j h, oz + k h)``. Returns the
    ramp-smoothed sums and the sharp-indicator sums (no cell volume factor).
    """
    cdef Py_ssize_t ni = values.shape[0], nj = values.shape[1], nk = values.shape[2]
    cdef Py_ssize_t m = radii.shape[0]
    cdef Py_ssize_t i, j, k, a
    cdef double x, y, z, r, w, val, dy2, dx2, R
    cdef double inv_h = 1.0 / h
    cdef double half = 0.5 * h
    cdef double rmax = 0.0
    smooth_arr = np.zeros(m, dtype=np.float64)
    sharp_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] smooth = smooth_arr
    cdef double[::1] sharp = sharp_arr
    for a in range(m):
        if radii[a] > rmax:
            rmax = radii[a]
    rmax = rmax + half
    with nogil:
        for i in range(ni):
            x = ox + i * h - cx
            dx2 = x * x
            if dx2 > rmax * rmax:
                continue
            for j in range(nj):
                y = oy + j * h - cy
                dy2 = dx2 + y * y
                if dy2 > rmax * rmax:
                    continue
                for k in range(nk):
                    z = oz + k * h - cz
                    r = sqrt(dy2 + z * z)
                    if r >= rmax:
                        continue
                    val = values[i, j, k]
                    for a in range(m):
                        R = radii[a]
                        if r < R:
                            sharp[a] += val
                        w = (R - r) * inv_h + 0.5
                        if w >= 1.0:
                            smooth[a] += val
                        elif w > 0.0:
                            smooth[a] += w * val
    return smooth_arr, sharp_arr


def fd4(const double[:, :, ::1] f, int axis, double h, int order):
    """Fourth-order central difference along ``axis`` with periodic wrap."""
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef Py_ssize_t i, j, k, nn
    cdef Py_ssize_t im2, im1, ip1, ip2
    cdef double c0, c1, c2, a, b, mid
    out_arr = np.empty((n0, n1, n2), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    if order == 1:
        c0 = 0.0
        c1 = 8.0 / (12.0 * h)
        c2 = -1.0 / (12.0 * h)
    else:
        c0 = -30.0 / (12.0 * h * h)
        c1 = 16.0 / (12.0 * h * h)
        c2 = -1.0 / (12.0 * h * h)
    nn = (n0, n1, n2)[axis]
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    if axis == 0:
                        im1 = (i - 1 + nn) % nn
                        im2 = (i - 2 + nn) % nn
                        ip1 = (i + 1) % nn
                        ip2 = (i + 2) % nn
                        a = f[ip1, j, k]
                        b = f[im1, j, k]
                        mid = f[ip2, j, k]
                        if order == 1:
                            out[i, j, k] = c1 * (a - b) + c2 * (mid - f[im2, j, k])
                        else:
                            out[i, j, k] = c0 * f[i, j, k] + c1 * (a + b) + c2 * (mid + f[im2, j, k])
                    elif axis == 1:
                        im1 = (j - 1 + nn) % nn
                        im2 = (j - 2 + nn) % nn
                        ip1 = (j + 1) % nn
                        ip2 = (j + 2) % nn
                        a = f[i, ip1, k]
                        b = f[i, im1, k]
                        mid = f[i, ip2, k]
                        if order == 1:
                            out[i, j, k] = c1 * (a - b) + c2 * (mid - f[i, im2, k])
                        else:
                            out[i, j, k] = c0 * f[i, j, k] + c1 * (a + b) + c2 * (mid + f[i, im2, k])
                    else:
                        im1 = (k - 1 + nn) % nn
                        im2 = (k - 2 + nn) % nn
                        ip1 = (k + 1) % nn
                        ip2 = (k + 2) % nn
                        a = f[i, j, ip1]
                        b = f[i, j, im1]
                        mid = f[i, j, ip2]
                        if order == 1:
                            out[i, j, k] = c1 * (a - b) + c2 * (mid - f[i, j, im2])
                        else:
                            out[i, j, k] = c0 * f[i, j, k] + c1 * (a + b) + c2 * (mid + f[i, j, im2])
    return out_arr


def renormalize(double[:, :, :, ::1] v):
    """Scale the 3-vector at every node to unit length in place.

    Returns the largest ``| |v| - 1 |`` seen before scaling.
    """
    cdef Py_ssize_t n0 = v.shape[1], n1 = v.shape[2], n2 = v.shape[3]
    cdef Py_ssize_t i, j, k
    cdef double a, b, c, nrm, dev, worst = 0.0
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    a = v[0, i, j, k]
                    b = v[1, i, j, k]
                    c = v[2, i, j, k]
                    nrm = sqrt(a * a + b * b + c * c)
                    dev = nrm - 1.0
                    if dev < 0:
                        dev = -dev
                    if dev > worst:
                        worst = dev
                    if nrm > 0.0:
                        v[0, i, j, k] = a / nrm
                        v[1, i, j, k] = b / nrm
                        v[2, i, j, k] = c / nrm
    return worst


def stress_products(const double[:, :, :, ::1] u, gv, double[:, :, :, ::1] out):
    """Six unique entries (00, 01, 02, 11, 12, 22) of ``u_i u_j + sum_k gv[i,k] gv[j,k]``.

    ``gv`` may be None (velocity stress only); otherwise shape (3, 3, n, n, n).
    """
    cdef Py_ssize_t n0 = u.shape[1], n1 = u.shape[2], n2 = u.shape[3]
    cdef Py_ssize_t i, j, k, a, b, c, s
    cdef double acc
    cdef double[:, :, :, :, ::1] g
    cdef bint coupled = gv is not None
    cdef int pi[6]
    cdef int pj[6]
    pi[:] = [0, 0, 0, 1, 1, 2]
    pj[:] = [0, 1, 2, 1, 2, 2]
    if coupled:
        g = gv
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    for s in range(6):
                        a = pi[s]
                        b = pj[s]
                        acc = u[a, i, j, k] * u[b, i, j, k]
                        if coupled:
                            for c in range(3):
                                acc = acc + g[a, c, i, j, k] * g[b, c, i, j, k]
                        out[s, i, j, k] = acc
    return out


def director_forcing(const double[:, :, :, ::1] u, const double[:, :, :, ::1] v,
                     const double[:, :, :, :, ::1] gv, double[:, :, :, ::1] out):
    """``|grad v|^2 v - (u . grad) v`` with ``gv[j, i] = d_j v_i``."""
    cdef Py_ssize_t n0 = u.shape[1], n1 = u.shape[2], n2 = u.shape[3]
    cdef Py_ssize_t i, j, k, a, b
    cdef double g2, adv
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    g2 = 0.0
                    for a in range(3):
                        for b in range(3):
                            g2 = g2 + gv[a, b, i, j, k] * gv[a, b, i, j, k]
                    for b in range(3):
                        adv = 0.0
                        for a in range(3):
                            adv = adv + u[a, i, j, k] * gv[a, b, i, j, k]
                        out[b, i, j, k] = g2 * v[b, i, j, k] - adv
    return out


def momentum_from_stress(const double complex[:, :, :, ::1] sh,
                         const double[::1] k0, const double[::1] k1, const double[::1] k2,
                         const double[::1] f0, const double[::1] f1, const double[::1] f2,
                         const unsigned char[::1] m0, const unsigned char[::1] m1,
                         const unsigned char[::1] m2, bint dealias,
                         double complex[:, :, :, ::1] nu, double complex[:, :, ::1] qh):
    """Fourier-side ``q = sum R_i R_j S_ij`` and ``N_i = -sum_j d_j S_ij - d_i q``.

    ``k*`` are odd-derivative wavenumbers (Nyquist zeroed), ``f*`` the full
    ones used in ``|xi|^2``, ``m*`` per-axis 2/3-rule masks.
    """
    cdef Py_ssize_t n0 = sh.shape[1], n1 = sh.shape[2], n2 = sh.shape[3]
    cdef Py_ssize_t i, j, k
    cdef double a, b, c, kk, inv
    cdef double complex s00, s01, s02, s11, s12, s22, q, d0, d1, d2
    cdef double complex I = 1j
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    if dealias and not (m0[i] and m1[j] and m2[k]):
                        qh[i, j, k] = 0
                        nu[0, i, j, k] = 0
                        nu[1, i, j, k] = 0
                        nu[2, i, j, k] = 0
                        continue
                    a = k0[i]
                    b = k1[j]
                    c = k2[k]
                    kk = f0[i] * f0[i] + f1[j] * f1[j] + f2[k] * f2[k]
                    inv = 1.0 / kk if kk > 0 else 0.0
                    s00 = sh[0, i, j, k]
                    s01 = sh[1, i, j, k]
                    s02 = sh[2, i, j, k]
                    s11 = sh[3, i, j, k]
                    s12 = sh[4, i, j, k]
                    s22 = sh[5, i, j, k]
                    q = -(a * a * s00 + b * b * s11 + c * c * s22
                          + 2.0 * (a * b * s01 + a * c * s02 + b * c * s12)) * inv
                    d0 = a * s00 + b * s01 + c * s02 + a * q
                    d1 = a * s01 + b * s11 + c * s12 + b * q
                    d2 = a * s02 + b * s12 + c * s22 + c * q
                    qh[i, j, k] = q
                    nu[0, i, j, k] = -I * d0
                    nu[1, i, j, k] = -I * d1
                    nu[2, i, j, k] = -I * d2
