"""Independent reference values computed without the package's grid machinery.

Radial integrals use adaptive 1D quadrature; closed forms are written out
from scratch rather than imported.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar


def smooth_step(t):
    """The C-infinity step exp(-1/t) / (exp(-1/t) + exp(-1/(1-t))) on [0, 1]."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    a = math.exp(-1.0 / t)
    b = math.exp(-1.0 / (1.0 - t))
    return a / (a + b)


def bump(s):
    """1 on ``s <= 1/2``, 0 on ``s >= 1``, smooth in between."""
    return 1.0 - smooth_step(2.0 * s - 1.0)


def radial_ball_integral(profile, R, p, breaks=()):
    """``int_{B_R} |f|^p`` for a radial ``f(|x|) = profile(r)``."""
    pts = [b for b in breaks if 0 < b < R]
    val, _ = quad(lambda r: abs(profile(r)) ** p * r * r, 0.0, R, points=pts or None, limit=400,
                  epsabs=0.0, epsrel=1e-12)
    return 4.0 * math.pi * val


def radial_morrey_sup(profile, p, gamma, r_max, breaks=()):
    """``sup_{1 <= R <= r_max} (R^-gamma int_{B_R} |f|^p)^(1/p)`` by bounded search."""
    def objective(R):
        return -(R ** (-gamma) * radial_ball_integral(profile, R, p, breaks)) ** (1.0 / p)

    grid = np.linspace(1.0, r_max, 65)
    vals = [objective(R) for R in grid]
    j = int(np.argmin(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return max(-res.fun, -min(vals))


def radial_ladder_max(profile, p, gamma, radii, breaks=()):
    return max((R ** (-gamma) * radial_ball_integral(profile, R, p, breaks)) ** (1.0 / p) for R in radii)


def radial_weighted_norm(profile, p, gamma, r_max, breaks=()):
    """``(int |f|^p (1 + |x|)^-gamma)^(1/p)`` for a radial profile supported in ``B_{r_max}``."""
    pts = [b for b in breaks if 0 < b < r_max]
    val, _ = quad(lambda r: abs(profile(r)) ** p * (1.0 + r) ** (-gamma) * r * r, 0.0, r_max,
                  points=pts or None, limit=400, epsabs=0.0, epsrel=1e-12)
    return (4.0 * math.pi * val) ** (1.0 / p)


def gaussian_besov_closed_form(s):
    """``sup_t t^(1/2) (4 pi (t + s))^(-3/2)``, attained at ``t = s/2``."""
    return 2.0 / (3.0 * math.sqrt(3.0) * (4.0 * math.pi) ** 1.5 * s)


def gaussian_besov_numeric(s):
    """The same supremum by 1D maximisation, as a check on the closed form."""
    res = minimize_scalar(lambda lt: -math.exp(0.5 * lt) * (4 * math.pi * (math.exp(lt) + s)) ** -1.5,
                          bounds=(math.log(s) - 10, math.log(s) + 10), method="bounded",
                          options={"xatol": 1e-12})
    return -res.fun
