"""Numpy implementations of the hot loops in ``_kernels.pyx``."""

import numpy as np


def shell_sums(values, ox, oy, oz, h, radii, cx, cy, cz):
    ni, nj, nk = values.shape
    x = ox + h * np.arange(ni) - cx
    y = oy + h * np.arange(nj) - cy
    z = oz + h * np.arange(nk) - cz
    r = np.sqrt(x[:, None, None] ** 2 + y[None, :, None] ** 2 + z[None, None, :] ** 2)
    radii = np.asarray(radii, dtype=np.float64)
    smooth = np.empty(radii.size)
    sharp = np.empty(radii.size)
    for a, R in enumerate(radii):
        sharp[a] = values[r < R].sum()
        w = np.clip((R - r) / h + 0.5, 0.0, 1.0)
        smooth[a] = (w * values).sum()
    return smooth, sharp


_FD4 = {
    1: (0.0, 8.0 / 12.0, -1.0 / 12.0),
    2: (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0),
}


def fd4(f, axis, h, order):
    c0, c1, c2 = _FD4[order]
    p1 = np.roll(f, -1, axis)
    m1 = np.roll(f, 1, axis)
    p2 = np.roll(f, -2, axis)
    m2 = np.roll(f, 2, axis)
    if order == 1:
        return (c1 * (p1 - m1) + c2 * (p2 - m2)) / h
    return (c0 * f + c1 * (p1 + m1) + c2 * (p2 + m2)) / (h * h)


def renormalize(v):
    nrm = np.sqrt(np.einsum("i...,i...->...", v, v))
    worst = float(np.max(np.abs(nrm - 1.0))) if nrm.size else 0.0
    safe = np.where(nrm > 0.0, nrm, 1.0)
    v /= safe
    return worst


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def stress_products(u, gv, out):
    for s, (a, b) in enumerate(_PAIRS):
        out[s] = u[a] * u[b]
        if gv is not None:
            out[s] += np.einsum("k...,k...->...", gv[a], gv[b])
    return out


def director_forcing(u, v, gv, out):
    g2 = np.einsum("ab...,ab...->...", gv, gv)
    out[...] = g2 * v - np.einsum("a...,ab...->b...", u, gv)
    return out


def momentum_from_stress(sh, k0, k1, k2, f0, f1, f2, m0, m1, m2, dealias, nu, qh):
    a = k0[:, None, None]
    b = k1[None, :, None]
    c = k2[None, None, :]
    kk = f0[:, None, None] ** 2 + f1[None, :, None] ** 2 + f2[None, None, :] ** 2
    inv = np.where(kk > 0, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)
    if dealias:
        inv = inv * (m0[:, None, None] & m1[None, :, None] & m2[None, None, :])
    s00, s01, s02, s11, s12, s22 = sh
    q = -(a * a * s00 + b * b * s11 + c * c * s22 + 2.0 * (a * b * s01 + a * c * s02 + b * c * s12)) * inv
    qh[...] = q
    mask = 1.0
    if dealias:
        mask = (m0[:, None, None] & m1[None, :, None] & m2[None, None, :]).astype(np.float64)
    nu[0] = -1j * (a * s00 + b * s01 + c * s02 + a * q) * mask
    nu[1] = -1j * (a * s01 + b * s11 + c * s12 + b * q) * mask
    nu[2] = -1j * (a * s02 + b * s12 + c * s22 + c * q) * mask
