"""Local Morrey, homogeneous Morrey and weighted Lebesgue norms.

All suprema over radii are taken over a finite ladder, so every reported norm
is a lower bound of the continuum quantity. Ball integrals use the
one-cell linear-ramp mask from :func:`elmorrey.grid.ball_integrals`; the
plain indicator values are carried alongside.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .errors import BoundaryContaminationError, ConfigurationError, DomainError
from .grid import ball_integrals, decay_margin, magnitude

REGION_NONPOSITIVE = "eta_nonpositive"
REGION_POSITIVE = "eta_positive"
REGION_UNDEFINED = "undefined"

LADDER_TOP = 0.9
DECAY_RATIO = 0.1


def _fraction(x):
    return x if isinstance(x, Fraction) else Fraction(float(x))


def eta_exact(gamma, p):
    """``eta = gamma/p - 3/p + 2/3`` as an exact rational of the binary inputs."""
    g, q = _fraction(gamma), _fraction(p)
    if q == 0:
        raise DomainError("p must be nonzero")
    return (3 * g - 9 + 2 * q) / (3 * q)


def eta(gamma, p):
    return float(eta_exact(gamma, p))


def in_parameter_range(gamma, p):
    return 0 < gamma < 3 and p >= 3


def threshold_gamma(p):
    """The sign boundary ``gamma = 3 - 2p/3`` where eta vanishes."""
    if isinstance(p, Fraction):
        return 3 - Fraction(2, 3) * p
    return 3.0 - 2.0 * p / 3.0


@dataclass(frozen=True)
class MorreyParams:
    p: float
    gamma: float

    def __post_init__(self):
        if not in_parameter_range(self.gamma, self.p):
            raise DomainError(
                f"need 0 < gamma < 3 <= p, got gamma={self.gamma!r}, p={self.p!r}"
            )

    @property
    def eta(self):
        return eta(self.gamma, self.p)

    @property
    def eta_exact(self):
        return eta_exact(self.gamma, self.p)


@dataclass(frozen=True)
class RegionPoint:
    gamma: float
    p: float
    eta: float
    region: str


def classify(gamma, p) -> RegionPoint:
    e = eta_exact(gamma, p) if p != 0 else None
    if e is None or not in_parameter_range(gamma, p):
        return RegionPoint(float(gamma), float(p), float(e) if e is not None else float("nan"), REGION_UNDEFINED)
    tag = REGION_NONPOSITIVE if e <= 0 else REGION_POSITIVE
    return RegionPoint(float(gamma), float(p), float(e), tag)


def eta_region_map(gamma_grid, p_grid):
    """Classify every ``(gamma, p)`` pair; gamma varies fastest."""
    return [classify(g, p) for p in p_grid for g in gamma_grid]


def write_eta_csv(points, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", "p", "eta", "region"])
        for pt in points:
            w.writerow([repr(pt.gamma), repr(pt.p), repr(pt.eta), pt.region])
    return path


# ---------------------------------------------------------------------------
# Radius ladders


def geometric_ladder(box_half, base=2.0**0.5, r_min=1.0, top=LADDER_TOP):
    """``r_min * base^k`` up to ``top * L``, with ``top * L`` appended as the last rung."""
    if base <= 1.0:
        raise ConfigurationError("ladder base must exceed 1")
    r_max = top * box_half
    if r_max < r_min:
        raise DomainError(f"box too small for a ladder starting at {r_min}")
    rungs = []
    k = 0
    while True:
        r = r_min * base**k
        if r > r_max * (1 + 1e-12):
            break
        rungs.append(r)
        k += 1
    if r_max - rungs[-1] > 1e-9 * r_max:
        rungs.append(r_max)
    return np.asarray(rungs)


def _validated_radii(radii, box_half, r_min=1.0):
    radii = np.unique(np.asarray(radii, dtype=np.float64))
    if radii.size == 0:
        raise DomainError("empty radius set")
    hi = LADDER_TOP * box_half * (1 + 1e-12)
    if radii[0] < r_min * (1 - 1e-12) or radii[-1] > hi:
        raise DomainError(f"radii must lie in [{r_min}, {LADDER_TOP * box_half}]")
    return radii


def _decay_guard(f, strict):
    rep = decay_margin(f)
    if rep.contaminated and strict:
        raise BoundaryContaminationError(
            f"|f| outside 0.9 L reaches {rep.ratio:.3e} of its maximum"
        )
    return rep.contaminated


# ---------------------------------------------------------------------------
# Norms


@dataclass(frozen=True)
class MorreyNorm:
    value: float
    radii: np.ndarray
    table: np.ndarray
    sharp_table: np.ndarray
    argmax_radius: float
    edge_flag: bool
    boundary_contaminated: bool

    @property
    def sharp_value(self):
        return float(self.sharp_table.max())


def local_morrey_norm(f, params: MorreyParams, radii=None, strict=False) -> MorreyNorm:
    """``max_R (R^-gamma int_{B(0,R)} |f|^p)^(1/p)`` over the radius ladder.

    ``edge_flag`` marks a maximiser at the largest rung, where the true
    supremum may lie beyond the ladder.
    """
    grid = f.grid
    if radii is None:
        radii = geometric_ladder(grid.box_half)
    radii = _validated_radii(radii, grid.box_half)
    contaminated = _decay_guard(f, strict)
    b = ball_integrals(f, radii, params.p)
    table = (radii ** (-params.gamma) * b.smoothed) ** (1.0 / params.p)
    sharp = (radii ** (-params.gamma) * b.sharp) ** (1.0 / params.p)
    idx = int(np.argmax(table))
    return MorreyNorm(
        float(table[idx]),
        radii,
        table,
        sharp,
        float(radii[idx]),
        bool(idx == radii.size - 1 and table[idx] > 0),
        contaminated,
    )


@dataclass(frozen=True)
class HomogeneousNorm:
    value: float
    center: tuple
    radius: float
    samples: int
    boundary_contaminated: bool


def center_sublattice(grid, stride=None):
    """Node coordinates on every ``stride``-th node per axis (default ``n/8``)."""
    stride = stride or max(grid.n // 8, 1)
    idx = np.arange(0, grid.n, stride)
    pts = grid.axis[idx]
    return [(a, b, c) for a in pts for b in pts for c in pts]


def homogeneous_morrey_norm(f, p, r, radii, centers=None, strict=False) -> HomogeneousNorm:
    """``max R^(3/r) (R^-3 int_{B(x0,R)} |f|^p)^(1/p)`` over sampled ``(x0, R)``.

    Only balls lying entirely inside the box are used; each is evaluated on
    the cropped block of nodes around its centre.
    """
    if not 1 < p < r:
        raise DomainError(f"need 1 < p < r, got p={p}, r={r}")
    grid = f.grid
    radii = np.unique(np.asarray(radii, dtype=np.float64))
    if radii.size == 0 or radii[0] <= 0:
        raise DomainError("radii must be a nonempty set of positive values")
    if centers is None:
        centers = center_sublattice(grid)
    contaminated = _decay_guard(f, strict)
    values = np.ascontiguousarray(magnitude(f) ** p)
    L, h, n = grid.box_half, grid.h, grid.n
    expo = 3.0 / r - 3.0 / p
    best = (0.0, (0.0, 0.0, 0.0), float(radii[0]))
    count = 0
    for c in centers:
        c = tuple(float(x) for x in c)
        reach = L - max(abs(x) for x in c)
        usable = radii[radii <= reach * (1 + 1e-12)]
        if usable.size == 0:
            continue
        rmax = usable[-1] + h
        lo = [max(int(np.floor((x - rmax + L) / h)), 0) for x in c]
        hi = [min(int(np.ceil((x + rmax + L) / h)) + 1, n) for x in c]
        block = np.ascontiguousarray(values[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]])
        origin = tuple(-L + h * i for i in lo)
        sm, _ = kernels.shell_sums(block, origin, h, usable, c)
        vals = usable**expo * (sm * grid.cell_volume) ** (1.0 / p)
        count += usable.size
        j = int(np.argmax(vals))
        if vals[j] > best[0]:
            best = (float(vals[j]), c, float(usable[j]))
    return HomogeneousNorm(best[0], best[1], best[2], count, contaminated)


def weighted_lebesgue_norm(f, p, gamma, strict=False):
    """``(int |f|^p (1 + |x|)^-gamma)^(1/p)``."""
    if p <= 0:
        raise DomainError("p must be positive")
    _decay_guard(f, strict)
    grid = f.grid
    w = (1.0 + grid.radius) ** (-gamma)
    return float((np.sum(magnitude(f) ** p * w) * grid.cell_volume) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Annulus diagnostics


@dataclass(frozen=True)
class AnnulusProfile:
    radii: np.ndarray
    values: np.ndarray
    scaled_values: np.ndarray
    sharp_values: np.ndarray
    under_resolved: np.ndarray
    shell_energy: np.ndarray | None = None
    boundary_contaminated: bool = False
    params: MorreyParams | None = field(default=None, compare=False)

    @property
    def decaying(self):
        return decay_rule(self.values)

    @property
    def scaled_decaying(self):
        return decay_rule(self.scaled_values)

    @property
    def shell_energy_sup(self):
        return None if self.shell_energy is None else float(self.shell_energy.max())

    def rows(self):
        for i, R in enumerate(self.radii):
            yield (R, self.values[i], self.scaled_values[i], "under_resolved" if self.under_resolved[i] else "ok")


def decay_rule(values, ratio=DECAY_RATIO):
    """Finite-ladder stand-in for ``lim_{R -> inf} a(R) = 0``.

    Holds when the profile ends at exactly zero, or when its last three values
    strictly decrease and the last is below ``ratio`` times the maximum.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return False
    if v[-1] == 0.0:
        return True
    if v.size < 3:
        return False
    tail = v[-3:]
    return bool(tail[0] > tail[1] > tail[2] and tail[2] < ratio * v.max())


def strictly_increasing(values):
    v = np.asarray(values)
    return bool(np.all(np.diff(v) > 0))


def annulus_profile(f, params: MorreyParams, radii=None, shell_energy=False, strict=False) -> AnnulusProfile:
    """``a(R) = (R^-gamma int_{R/2<|x|<R} |f|^p)^(1/p)`` and ``R^(3 eta) a(R)``.

    With ``shell_energy`` the profile also carries ``int_{R/2<|x|<R} |f|^2``
    per radius, whose supremum is the finite-energy-on-shells diagnostic.
    """
    grid = f.grid
    if radii is None:
        radii = geometric_ladder(grid.box_half)
    radii = _validated_radii(radii, grid.box_half)
    contaminated = _decay_guard(f, strict)
    both = np.concatenate([radii / 2.0, radii])
    b = ball_integrals(f, both, params.p)
    m = radii.size
    shell = b.smoothed[m:] - b.smoothed[:m]
    shell_sharp = b.sharp[m:] - b.sharp[:m]
    values = (radii ** (-params.gamma) * np.maximum(shell, 0.0)) ** (1.0 / params.p)
    sharp = (radii ** (-params.gamma) * np.maximum(shell_sharp, 0.0)) ** (1.0 / params.p)
    scaled = radii ** (3.0 * params.eta) * values
    energy = None
    if shell_energy:
        e = ball_integrals(f, both, 2.0)
        energy = e.smoothed[m:] - e.smoothed[:m]
    return AnnulusProfile(
        radii,
        values,
        scaled,
        sharp,
        radii / 2.0 < 4.0 * grid.h,
        energy,
        contaminated,
        params,
    )


def write_profile_csv(profile: AnnulusProfile, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R", "a", "scaled", "flag"])
        for row in profile.rows():
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), row[3]])
    return path
