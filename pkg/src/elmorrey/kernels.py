"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy versions in ``_kernels_py`` are used. Setting ``ELMORREY_PURE_PYTHON=1``
forces the numpy backend.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("ELMORREY_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def shell_sums(values, origin, h, radii, center=(0.0, 0.0, 0.0), backend=None):
    """Smoothed and sharp ball sums of ``values`` for each radius in ``radii``."""
    impl = _pick(backend)
    values = np.ascontiguousarray(values, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    ox, oy, oz = (float(o) for o in origin)
    cx, cy, cz = (float(c) for c in center)
    return impl.shell_sums(values, ox, oy, oz, float(h), radii, cx, cy, cz)


def fd4(f, axis, h, order=1, backend=None):
    """Periodic fourth-order central difference (first or second derivative)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    impl = _pick(backend)
    return impl.fd4(np.ascontiguousarray(f, dtype=np.float64), int(axis), float(h), int(order))


def renormalize(v, backend=None):
    """Normalise a (3, n, n, n) array to unit length per node, in place."""
    impl = _pick(backend)
    if not (v.flags.c_contiguous and v.dtype == np.float64):
        raise ValueError("renormalize needs a C-contiguous float64 array")
    return impl.renormalize(v)


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


def stress_products(u, gv=None, out=None, backend=None):
    """Six unique entries of ``u ⊗ u + ∇v ⊙ ∇v`` in order 00, 01, 02, 11, 12, 22."""
    impl = _pick(backend)
    if out is None:
        out = np.empty((6,) + u.shape[1:])
    impl.stress_products(u, gv, out)
    return out


def director_forcing(u, v, gv, out=None, backend=None):
    """``|∇v|² v - (u·∇)v``."""
    impl = _pick(backend)
    if out is None:
        out = np.empty_like(v)
    impl.director_forcing(u, v, gv, out)
    return out


def momentum_from_stress(sh, plan, dealias=True, backend=None):
    """Reconstructed pressure and projected momentum forcing from stress coefficients.

    Returns ``(N, q_hat)`` where ``N_i = -sum_j d_j S_ij - d_i q`` in Fourier space.
    """
    impl = _pick(backend)
    nu = np.empty((3,) + sh.shape[1:], dtype=complex)
    qh = np.empty(sh.shape[1:], dtype=complex)
    t = plan.axis_tables
    impl.momentum_from_stress(sh, *t, bool(dealias), nu, qh)
    return nu, qh
