"""Checkers for the inequalities and identities behind the Liouville results.

Every checker returns a report dataclass with a single ``holds`` flag derived
from explicit tolerances. Checkers never modify their inputs and are
deterministic, so re-running one on the same data reproduces it bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BoundaryContaminationError, ConfigurationError, DomainError, PreconditionError
from .ericksen import (
    EnergyLedger,
    StationaryState,
    advection,
    director_stress_divergence,
    stationary_residual,
)
from .grid import (
    Grid3,
    ScalarField,
    TensorField,
    VectorField,
    annulus_integral,
    ball_integrals,
    cutoff_field,
    cutoff_profile,
    decay_margin,
    gradient,
    jacobian,
    random_smooth,
    laplacian,
    lp_norm,
    tensor_divergence,
    CutoffPairing,
    fft,
)
from .morrey import (
    MorreyParams,
    annulus_profile,
    geometric_ladder,
    homogeneous_morrey_norm,
    local_morrey_norm,
    strictly_increasing,
    weighted_lebesgue_norm,
)
from .spectral import besov_minus1_norm, leray_project, plan_for, pressure_q, riesz

IDENTITY_TOL = 1e-7
INEQUALITY_TOL = 1e-3
RESIDUAL_TOL = 1e-6
LIOUVILLE_TOL = 1e-6
GROWTH_FACTOR = 10.0


def _cell_sum(a, grid):
    return float(np.sum(a) * grid.cell_volume)


def _dot(a, b):
    return np.einsum("i...,i...->...", a, b)


def _sq(a):
    return np.einsum("i...,i...->...", a, a) if a.ndim == 4 else np.einsum("ij...,ij...->...", a, a)


def _relative(a, b, *scale_terms):
    scale = max([abs(a), abs(b)] + [abs(s) for s in scale_terms])
    return 0.0 if scale == 0.0 else abs(a - b) / scale


# ---------------------------------------------------------------------------
# Caccioppoli estimate


@dataclass(frozen=True)
class CaccioppoliReport:
    """Both sides of the Caccioppoli estimate at one radius.

    ``i1..i4`` are the four cutoff-weighted integrals whose sum bounds ``lhs``;
    ``bounds`` are the corresponding Hölder-type expressions built from annulus
    integrals, ``constants`` the ratios ``|I_k| / bound_k`` and
    ``lhs_constant`` the constant implied directly for the closed-form bound.
    """

    R: float
    lhs: float
    theta_lhs: float
    i1: float
    i2: float
    i3: float
    i4: float
    rhs_eq05: float
    bounds: dict
    constants: dict
    lhs_constant: float
    rhs_closed: float
    residual: float
    tol: float
    holds: bool

    @property
    def terms(self):
        return (self.i1, self.i2, self.i3, self.i4)


def _state_derivatives(s: StationaryState, scheme):
    if s.exact is not None:
        return s.exact.grad_u.data, s.exact.grad_v.data
    return jacobian(s.u, scheme).data, jacobian(s.v, scheme).data


def caccioppoli_check(
    s: StationaryState,
    R: float,
    params: MorreyParams,
    tol=INEQUALITY_TOL,
    residual_tol=RESIDUAL_TOL,
    scheme="spectral",
) -> CaccioppoliReport:
    """Evaluate ``int_{B_{R/2}} |grad u|^2`` against ``I1 + I2 + I3 + I4``.

    The cutoff enters through its closed-form gradient and Laplacian. Refuses
    (``PreconditionError``) when the stationary residual exceeds
    ``residual_tol``, since the estimate is only claimed for solutions.
    """
    res = stationary_residual(s, scheme=scheme)
    if res.max_total > residual_tol:
        raise PreconditionError(
            f"stationary residual {res.max_total:.3e} exceeds {residual_tol:g}; "
            "the Caccioppoli estimate applies to solutions only",
            residual=res.max_total,
        )
    grid = s.grid
    p = params.p
    gu, gv = _state_derivatives(s, scheme)
    gu2 = _sq(gu)
    gv2 = _sq(gv)
    u = s.u.data
    u2 = _sq(u)
    cf = cutoff_field(grid, R)
    udt = _dot(u, cf.grad.data)
    lhs = float(ball_integrals(s.u, [R / 2.0], values=gu2).smoothed[0])
    theta_lhs = _cell_sum(gu2 * cf.theta.data, grid)
    i1 = _cell_sum(0.5 * u2 * udt, grid)
    i2 = _cell_sum(0.5 * gv2 * udt, grid)
    i3 = _cell_sum(s.p.data * udt, grid)
    i4 = _cell_sum(0.5 * u2 * cf.lap.data, grid)
    rhs = i1 + i2 + i3 + i4

    au = annulus_integral(s.u, R, p, values=u2 ** (p / 2.0)).value
    av = annulus_integral(s.u, R, p, values=gv2 ** (p / 2.0)).value
    aq = annulus_integral(s.p, R, p / 2.0).value
    a2 = annulus_integral(s.u, R, 2.0, values=u2).value
    scale = R ** (2.0 - 9.0 / p) * max(au, 0.0) ** (1.0 / p)
    bounds = {
        "i1": max(au, 0.0) ** (2.0 / p) * scale,
        "i2": max(av, 0.0) ** (2.0 / p) * scale,
        "i3": max(aq, 0.0) ** (2.0 / p) * scale,
        "i4": max(a2, 0.0) / R**2,
    }
    terms = {"i1": i1, "i2": i2, "i3": i3, "i4": i4}
    constants = {k: _ratio(abs(terms[k]), bounds[k]) for k in terms}
    total_bound = sum(bounds.values())
    lhs_constant = _ratio(lhs, total_bound)
    c = max(constants.values())
    rhs_closed = c * total_bound if math.isfinite(c) else math.inf
    dominant = max([abs(lhs)] + [abs(t) for t in terms.values()])
    holds = bool(lhs <= rhs + tol * dominant)
    return CaccioppoliReport(
        float(R), lhs, theta_lhs, i1, i2, i3, i4, rhs, bounds, constants,
        lhs_constant, rhs_closed, res.max_total, tol, holds,
    )


def _ratio(num, den):
    if den > 0:
        return float(num / den)
    return 0.0 if num == 0 else math.inf


# ---------------------------------------------------------------------------
# Integration-by-parts identities


@dataclass(frozen=True)
class IdentityDefect:
    name: str
    lhs: float
    rhs: float
    defect: float
    tol: float

    @property
    def holds(self):
        return self.defect <= self.tol


@dataclass(frozen=True)
class IdentitySuite:
    R: float
    identities: dict
    tol: float

    @property
    def max_defect(self):
        return max(d.defect for d in self.identities.values())

    @property
    def holds(self):
        return all(d.holds for d in self.identities.values())


def ibp_identity_suite(
    u: VectorField,
    v: VectorField,
    p_field: ScalarField,
    R: float,
    tol=IDENTITY_TOL,
    scheme="spectral",
    quadrature="spectral",
    unit_director=None,
) -> IdentitySuite:
    """Integration-by-parts rearrangements of the energy-type identities.

    Each identity is evaluated with both sides built from different fields
    (for instance ``Δu`` on one side, ``|∇u|²`` and ``Δθ`` on the other) and
    its defect is ``|lhs - rhs|`` divided by the largest term entering it.
    The momentum and director residuals enter the two summary identities, so
    they hold for arbitrary smooth fields; only ``div u = 0`` is required.

    ``scheme`` selects the derivative scheme. ``quadrature="spectral"``
    integrates against the exact Fourier coefficients of the cutoff
    (:class:`CutoffPairing`); ``"sampled"`` sums against the sampled cutoff.
    The pointwise unit-field identity is included when ``|v| = 1``
    (auto-detected unless ``unit_director`` is given).
    """
    grid = u.grid
    if R > grid.box_half * (1 + 1e-12):
        raise BoundaryContaminationError(
            f"cutoff support B(0,{R}) leaves the box of half-width {grid.box_half}"
        )
    if quadrature not in ("spectral", "sampled"):
        raise ConfigurationError(f"unknown quadrature {quadrature!r}")

    gu = jacobian(u, scheme).data
    lap_u = laplacian(u, scheme).data
    gp = gradient(p_field, scheme).data
    gv = jacobian(v, scheme).data
    lap_v = laplacian(v, scheme).data
    uu = TensorField(grid, np.einsum("i...,j...->ij...", u.data, u.data))
    div_uu = tensor_divergence(uu, scheme).data
    div_vv = director_stress_divergence(TensorField(grid, gv), scheme).data
    vu = TensorField(grid, np.einsum("j...,i...->ij...", u.data, v.data))
    div_vu = tensor_divergence(vu, scheme).data  # component i: d_j (v_i u_j)
    grad_half_gv2 = gradient(ScalarField(grid, 0.5 * _sq(gv)), scheme).data
    tension_term = np.einsum("k...,ik...->i...", lap_v, gv)  # (Δv)(∇v), index i
    momentum = -lap_u + div_uu + div_vv + gp
    director = -lap_v + advection(u, TensorField(grid, gv)) - _sq(gv) * v.data

    pointwise = {"tensor_identity": _max_defect(div_vv, grad_half_gv2 + tension_term)}
    if unit_director is None:
        unit_director = bool(np.abs(v.magnitude() - 1.0).max() <= 1e-10)
    if unit_director:
        pointwise["unit_identity"] = _max_defect(-_sq(gv), _dot(v.data, lap_v))

    if quadrature == "spectral":
        cp = CutoffPairing(grid, R)
        S, SG, SL = cp.theta, cp.grad, cp.lap
    else:
        cf = cutoff_field(grid, R, margin=1.0)
        th, gth, lth = cf.theta.data, cf.grad.data, cf.lap.data

        def S(a):
            return _cell_sum(a * th, grid)

        def SG(F):
            return _cell_sum(_dot(F, gth), grid)

        def SL(a):
            return _cell_sum(a * lth, grid)

    U, P, V, LV = u.data, p_field.data, v.data, lap_v
    U2, GU2, GV2 = _sq(U), _sq(gu), _sq(gv)
    # sum_ij Δv_j d_i v_j u_i and its relabelled twin sum_ij Δv_i d_j v_i u_j
    cross_a = S(np.einsum("j...,ij...,i...->...", LV, gv, U))
    cross_b = S(np.einsum("i...,ji...,j...->...", LV, gv, U))
    vlv = _dot(V, LV)

    t1_l = S(-_dot(lap_u, U))
    t1_r = (-0.5 * SL(U2), S(GU2))
    t2_l = S(_dot(div_uu, U))
    t2_r = (-0.5 * SG(U2 * U),)
    t3_l = S(_dot(div_vv, U))
    t3_r = (-0.5 * SG(GV2 * U), cross_a)
    t4_l = S(_dot(gp, U))
    t4_r = (-SG(P * U),)
    d1_l = S(_dot(LV, LV))
    d1_r = (S(_sq(LV)),)
    d2_l = -S(_dot(div_vu, LV))
    d2_r = (-cross_b,)
    d3_l = S(GV2 * vlv)
    d3_r = (S(_dot(GV2 * V, LV)),)
    mom_pair = S(_dot(momentum, U))
    dir_pair = S(_dot(director, LV))
    eq03_l = S(GU2)
    eq03_r = (SG((0.5 * U2 + 0.5 * GV2 + P) * U), 0.5 * SL(U2), -cross_a, mom_pair)
    eq04_l = S(_sq(LV))
    eq04_r = (cross_b, -S(GV2 * vlv), -dir_pair)

    out = {}

    def add(name, lhs, rhs_terms):
        rhs = float(sum(rhs_terms))
        out[name] = IdentityDefect(name, lhs, rhs, _relative(lhs, rhs, *rhs_terms), tol)

    add("eq01_viscous", t1_l, t1_r)
    add("eq01_convection", t2_l, t2_r)
    add("eq01_director_stress", t3_l, t3_r)
    add("eq01_pressure", t4_l, t4_r)
    add("eq02_laplacian", d1_l, d1_r)
    add("eq02_transport", d2_l, d2_r)
    add("eq02_constraint", d3_l, d3_r)
    # (a) = 0: the two relabelled cross sums cancel.
    a_scale = max(abs(cross_a), abs(cross_b))
    out["cancellation_a"] = IdentityDefect(
        "cancellation_a", cross_b - cross_a, 0.0,
        0.0 if a_scale == 0 else abs(cross_b - cross_a) / a_scale, tol,
    )
    add("eq03", eq03_l, eq03_r)
    add("eq04", eq04_l, eq04_r)
    for name, (num, scale) in pointwise.items():
        out[name] = IdentityDefect(name, num, 0.0, 0.0 if scale == 0 else num / scale, tol)
    return IdentitySuite(float(R), out, tol)


def _max_defect(a, b):
    """``max |a - b|`` and the scale ``max(max|a|, max|b|)`` for a pointwise identity."""
    return float(np.abs(a - b).max()), float(max(np.abs(a).max(), np.abs(b).max()))


IBP_KMAX = 3
IBP_TILT = 0.2


@dataclass(frozen=True)
class IdentityBattery:
    n: int
    seeds: tuple
    R: float
    worst: dict
    tol: float

    @property
    def max_defect(self):
        return max(self.worst.values())

    @property
    def holds(self):
        return self.max_defect <= self.tol


def random_solenoidal_state(grid: Grid3, seed, kmax=IBP_KMAX, tilt=IBP_TILT):
    """Divergence-free ``u``, a unit director tilted from ``e3`` and the matching ``q``.

    The director is a normalised band-limited field, so it is not itself
    band-limited; ``tilt`` bounds the perturbation and with it the spectral
    tail that the unit identity sees.
    """
    rng = np.random.default_rng(seed)
    plan = plan_for(grid)
    u = leray_project(VectorField(grid, random_smooth(grid, rng, 3, kmax=kmax)), plan)
    w = random_smooth(grid, rng, 3, kmax=kmax, amplitude=tilt)
    w[2] += 1.0
    v = VectorField(grid, w / np.sqrt(_sq(w)))
    q = pressure_q(u, jacobian(v), plan=plan).q
    return u, v, q


def ibp_battery(grid: Grid3, seeds=range(10), R=None, tol=IDENTITY_TOL, scheme="spectral") -> IdentityBattery:
    """Run :func:`ibp_identity_suite` over seeded random states and keep the worst defect per identity."""
    R = 0.6 * grid.box_half if R is None else float(R)
    seeds = tuple(int(s) for s in seeds)
    worst = {}
    for seed in seeds:
        suite = ibp_identity_suite(*random_solenoidal_state(grid, seed), R, tol=tol, scheme=scheme)
        for name, d in suite.identities.items():
            worst[name] = max(worst.get(name, 0.0), d.defect)
    return IdentityBattery(grid.n, seeds, R, worst, tol)


# ---------------------------------------------------------------------------
# Elliptic estimate for the director


@dataclass(frozen=True)
class EllipticReport:
    radii: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    constants: np.ndarray
    residual: float
    diverging: bool

    @property
    def holds(self):
        return not self.diverging

    @property
    def max_constant(self):
        return float(np.max(self.constants)) if self.constants.size else 0.0


def elliptic_v_check(
    v: VectorField,
    radii=None,
    residual_tol=RESIDUAL_TOL,
    growth=GROWTH_FACTOR,
    scheme="spectral",
) -> EllipticReport:
    """Measure ``c(R) = int_{B_{R/2}} |grad v|^2 / int_{C(R/2,R)} |grad v|^2``.

    ``v`` must solve ``-Δv = |∇v|² v`` to ``residual_tol``. The ladder is
    flagged as diverging when some ``c(R)`` is infinite, or when the last
    three constants strictly increase and the last exceeds ``growth`` times
    the smallest.
    """
    grid = v.grid
    gv = jacobian(v, scheme).data
    gv2 = _sq(gv)
    resid = -laplacian(v, scheme).data - gv2 * v.data
    r = float(np.sqrt(_sq(resid)).max())
    if r > residual_tol:
        raise PreconditionError(
            f"director residual {r:.3e} exceeds {residual_tol:g}", residual=r
        )
    if radii is None:
        radii = geometric_ladder(grid.box_half)
    radii = np.asarray(radii, dtype=np.float64)
    b = ball_integrals(v, np.concatenate([radii / 2.0, radii]), values=gv2)
    m = radii.size
    lhs = b.smoothed[:m]
    rhs = b.smoothed[m:] - lhs
    consts = np.array([_ratio(a, c) for a, c in zip(lhs, rhs)])
    diverging = bool(np.any(~np.isfinite(consts)))
    if not diverging and consts.size >= 3:
        tail = consts[-3:]
        diverging = bool(tail[0] < tail[1] < tail[2] and tail[2] > growth * max(consts.min(), 1e-300))
    return EllipticReport(radii, lhs, rhs, consts, r, diverging)


# ---------------------------------------------------------------------------
# Energy inequalities


@dataclass(frozen=True)
class LocalEnergyDefect:
    """``mu_hat`` for one test function ``alpha_{eps,t0,t1}(t) theta_R(x)``.

    ``terms`` holds the paired integrals; ``mu`` uses the Hessian form of the
    director dissipation (an exact identity for smooth solutions) and
    ``mu_laplacian_form`` the ``|Δv|²`` form, which differs from it by the
    pairing of a divergence with the cutoff.
    """

    t0: float
    t1: float
    R: float
    eps: float
    mu: float
    scale: float
    relative: float
    mu_laplacian_form: float
    terms: dict
    constraint_pair: tuple
    constraint_defect: float
    tol: float

    @property
    def holds(self):
        return self.relative <= self.tol


@dataclass(frozen=True)
class LocalEnergyReport:
    windows: list
    tol: float

    @property
    def max_relative(self):
        return max((w.relative for w in self.windows), default=0.0)

    @property
    def min_mu(self):
        return min((w.mu for w in self.windows), default=0.0)

    @property
    def holds(self):
        return all(w.holds for w in self.windows)


@dataclass(frozen=True)
class EnergyInequalityReport:
    """Global energy inequality along a ledger.

    ``defect`` is ``D(t)``; ``balance`` adds back the director tension
    dissipation, so it measures the exact energy balance.
    """

    times: np.ndarray
    defect: np.ndarray
    balance: np.ndarray
    e0: float
    max_defect: float
    max_abs_balance: float
    tol: float
    holds: bool
    local: LocalEnergyReport | None = None

    @property
    def mu_min(self):
        return None if self.local is None else self.local.min_mu


def global_energy_check(ledger: EnergyLedger, tol=INEQUALITY_TOL, local=None) -> EnergyInequalityReport:
    """``D(t) <= tol * E(0)`` for every ledger time."""
    t = np.asarray(ledger.t)
    d = np.asarray(ledger.defect)
    bal = np.asarray(ledger.balance)
    e0 = float(ledger.e0)
    md = float(d.max()) if d.size else 0.0
    mb = float(np.abs(bal).max()) if bal.size else 0.0
    holds = bool(np.all(d <= tol * e0))
    return EnergyInequalityReport(t, d, bal, e0, md, mb, tol, holds, local)


def _alpha(s):
    """Quintic smoothstep in time: 0 below 1/2, 1 above 1, with its derivative."""
    s = np.asarray(s, dtype=np.float64)
    tau = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    a = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
    da = 60.0 * tau**2 * (1.0 - tau) ** 2  # d/ds = 2 * 30 tau^2 (1 - tau)^2
    return a, da


def time_cutoff(t, t0, t1, eps):
    """``alpha((t - t0)/eps) - alpha((t - t1)/eps)`` and its time derivative."""
    a0, d0 = _alpha((np.asarray(t) - t0) / eps)
    a1, d1 = _alpha((np.asarray(t) - t1) / eps)
    return a0 - a1, (d0 - d1) / eps


_TERMS = ("A", "grad_u", "hessian_v", "constraint", "diffusion", "flux", "director_flux", "laplacian_v", "constraint_sq")


class LocalEnergyProbe:
    """Records the spatial integrals of the local energy balance at every step.

    Attach to :func:`elmorrey.ericksen.evolve` through ``probes=[probe]``.
    For each radius the per-step integrals against ``theta_R``, ``grad theta_R``
    and ``Delta theta_R`` are stored; :func:`local_energy_defect` then pairs
    them with a time cutoff. With ``quadrature="spectral"`` each integrand is
    transformed once and paired with the exact cutoff coefficients of every
    radius; ``"sampled"`` sums against the sampled cutoff.
    """

    def __init__(self, radii, quadrature="spectral"):
        if quadrature not in ("spectral", "sampled"):
            raise ConfigurationError(f"unknown quadrature {quadrature!r}")
        self.radii = tuple(float(r) for r in radii)
        self.quadrature = quadrature
        self.times = []
        self.values = []
        self._cut = None

    def _cutoffs(self, grid):
        if self._cut is None:
            if self.quadrature == "spectral":
                self._cut = [CutoffPairing(grid, R) for R in self.radii]
            else:
                self._cut = [cutoff_field(grid, R) for R in self.radii]
        return self._cut

    def _integrands(self, sf):
        """Scalar integrands against theta, Delta theta and vector ones against grad theta."""
        u = sf.u
        u2 = _sq(u)
        theta = {"grad_u": _sq(sf.grad_u)}
        if sf.coupled:
            gv = sf.grad_v  # [j, i] = d_j v_i
            lap = sf.lap_v
            vlap = _dot(sf.v, lap)
            gv2 = _sq(gv)
            e = 0.5 * (u2 + gv2)
            adv = np.einsum("j...,ji...->i...", u, gv)
            theta["hessian_v"] = -np.einsum("abc...,abc...->...", sf.hess_v, sf.hess_v)
            theta["constraint"] = -gv2 * vlap
            theta["laplacian_v"] = -_sq(lap)
            theta["constraint_sq"] = vlap**2
            grad = {"flux": (e + sf.q) * u, "director_flux": np.einsum("i...,ki...->k...", adv, gv)}
        else:
            e = 0.5 * u2
            grad = {"flux": (e + sf.q) * u}
        theta["A"] = e
        return theta, {"diffusion": e}, grad

    def record(self, sf):
        grid = sf.grid
        theta, lap, grad = self._integrands(sf)
        cuts = self._cutoffs(grid)
        rows = [dict() for _ in cuts]
        if self.quadrature == "spectral":
            for kind, group in (("theta", theta), ("lap", lap), ("grad", grad)):
                for name, data in group.items():
                    spec = fft(data)
                    for row, cp in zip(rows, cuts):
                        row[name] = getattr(cp, kind + "_spec")(spec)
        else:
            for row, cf in zip(rows, cuts):
                for name, data in theta.items():
                    row[name] = _cell_sum(data * cf.theta.data, grid)
                for name, data in lap.items():
                    row[name] = _cell_sum(data * cf.lap.data, grid)
                for name, data in grad.items():
                    row[name] = _cell_sum(_dot(data, cf.grad.data), grid)
        self.times.append(float(sf.t))
        self.values.append([[row.get(k, 0.0) for k in _TERMS] for row in rows])

    def series(self):
        """Times and an array of shape (steps, radii, terms)."""
        return np.asarray(self.times), np.asarray(self.values)

    def write_csv(self, path):
        """One row per (time, radius) with every recorded integral."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "R"] + list(_TERMS))
            for t, row in zip(self.times, self.values):
                for R, vals in zip(self.radii, row):
                    w.writerow([repr(t), repr(R)] + [repr(float(x)) for x in vals])
        return path

    @classmethod
    def read_csv(cls, path, quadrature="spectral"):
        with Path(path).open() as fh:
            rows = list(csv.DictReader(fh))
        radii = sorted({float(r["R"]) for r in rows})
        probe = cls(radii, quadrature)
        by_time = {}
        for r in rows:
            by_time.setdefault(float(r["t"]), {})[float(r["R"])] = [float(r[k]) for k in _TERMS]
        for t in sorted(by_time):
            probe.times.append(t)
            probe.values.append([by_time[t][R] for R in radii])
        return probe


class SupNormProbe:
    """Records ``max|u| + max|grad v|`` at every time level."""

    def __init__(self):
        self.times = []
        self.values = []

    def record(self, sf):
        um = float(np.sqrt(_sq(sf.u)).max())
        gm = float(np.sqrt(_sq(sf.grad_v)).max()) if sf.coupled else 0.0
        self.times.append(float(sf.t))
        self.values.append(um + gm)

    @property
    def max_value(self):
        return max(self.values) if self.values else 0.0


def _gauss_integral(f, breaks, order=6):
    x, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        total += half * float(np.sum(w * f(mid + half * x)))
    return total


def local_energy_defect(probe: LocalEnergyProbe, t0, t1, R, eps=None, tol=INEQUALITY_TOL) -> LocalEnergyDefect:
    """Pair the recorded balance with ``alpha_{eps,t0,t1}(t) theta_R(x)``.

    ``mu = int alpha (H + G + C + F + K - B) dt + int alpha' A dt`` where
    ``A = int e theta``, ``B = int |grad u|^2 theta``, ``H = -int |∇²v|² theta``,
    ``G = -int |∇v|² (v·Δv) theta``, ``C = int e Δtheta``,
    ``F = int (e + q) u·∇theta`` and ``K = int ((u·∇)v · ∂_k v) ∂_k theta``.
    Each series is interpolated by a cubic spline in time and integrated by
    Gauss-Legendre quadrature between spline knots and cutoff breakpoints.
    ``eps`` defaults to four time steps.
    """
    times, vals = probe.series()
    if times.size < 4:
        raise DomainError("local energy probe holds fewer than four time levels")
    try:
        j = probe.radii.index(float(R))
    except ValueError:
        raise DomainError(f"radius {R} was not recorded; have {probe.radii}") from None
    dt = float(np.median(np.diff(times)))
    eps = 4.0 * dt if eps is None else float(eps)
    if not (t0 < t1 and t0 + 0.5 * eps >= times[0] - 1e-12 and t1 + eps <= times[-1] + 1e-12):
        raise DomainError(
            f"window [{t0}, {t1}] with eps={eps} is not covered by [{times[0]}, {times[-1]}]"
        )
    series = vals[:, j, :]
    splines = [CubicSpline(times, series[:, k]) for k in range(series.shape[1])]
    lo, hi = t0 + 0.5 * eps, t1 + eps
    knots = times[(times > lo) & (times < hi)]
    extra = [t0 + 0.5 * eps, t0 + eps, t1 + 0.5 * eps, t1 + eps]
    breaks = np.unique(np.concatenate([knots, extra]))
    breaks = breaks[(breaks >= lo) & (breaks <= hi)]

    def paired(k, use_derivative=False):
        def f(t):
            a, da = time_cutoff(t, t0, t1, eps)
            return (da if use_derivative else a) * splines[k](t)
        return _gauss_integral(f, breaks)

    def paired_abs(k, use_derivative=False):
        def f(t):
            a, da = time_cutoff(t, t0, t1, eps)
            return np.abs((da if use_derivative else a) * splines[k](t))
        return _gauss_integral(f, breaks)

    idx = {name: i for i, name in enumerate(_TERMS)}
    terms = {
        "time_derivative": paired(idx["A"], True),
        "grad_u": -paired(idx["grad_u"]),
        "hessian_v": paired(idx["hessian_v"]),
        "constraint": paired(idx["constraint"]),
        "diffusion": paired(idx["diffusion"]),
        "flux": paired(idx["flux"]),
        "director_flux": paired(idx["director_flux"]),
    }
    mu = float(sum(terms.values()))
    scale = paired_abs(idx["A"], True) + sum(
        paired_abs(idx[k]) for k in ("grad_u", "hessian_v", "constraint", "diffusion", "flux", "director_flux")
    )
    lap_form = mu - terms["hessian_v"] + paired(idx["laplacian_v"])
    g = terms["constraint"]
    g_sq = paired(idx["constraint_sq"])
    c_def = _relative(g, g_sq)
    rel = 0.0 if scale == 0.0 else abs(mu) / scale
    return LocalEnergyDefect(
        float(t0), float(t1), float(R), eps, mu, float(scale), rel, float(lap_form),
        terms, (g, g_sq), c_def, tol,
    )


def local_energy_report(probe: LocalEnergyProbe, windows, tol=INEQUALITY_TOL, eps=None) -> LocalEnergyReport:
    """Evaluate every ``(t0, t1)`` window at every recorded radius."""
    out = [
        local_energy_defect(probe, t0, t1, R, eps=eps, tol=tol)
        for (t0, t1) in windows
        for R in probe.radii
    ]
    return LocalEnergyReport(out, tol)


# ---------------------------------------------------------------------------
# Embedding chains


@dataclass(frozen=True)
class FamilyMember:
    """A sampled test function with what is known about it analytically."""

    name: str
    field: ScalarField
    in_L92: bool


@dataclass(frozen=True)
class FittedConstant:
    """Smallest ``C`` with ``||f||_Y <= C ||f||_X`` over the family."""

    name: str
    value: float
    argmax: str
    ratios: dict
    bound: float | None
    slack: float

    @property
    def holds(self):
        if not math.isfinite(self.value):
            return False
        return self.bound is None or self.value <= self.bound * (1.0 + self.slack)


@dataclass(frozen=True)
class EmbeddingReport:
    params: MorreyParams
    r: float
    delta: float
    members: list
    dropped: list
    constants: dict
    gamma_monotone: bool
    decay: dict

    @property
    def holds(self):
        ok = all(c.holds for c in self.constants.values()) and self.gamma_monotone
        return ok and not any(v == "violated" for v in self.decay.values())


def _taper(grid, radius):
    """Smooth taper equal to 1 on ``|x| <= radius/2`` and 0 beyond ``radius``."""
    return cutoff_profile(grid.radius / radius)[0]


def default_family(grid: Grid3) -> list:
    """Compact bumps, Gaussians, an oscillating Gaussian and tapered power laws."""
    r = grid.radius
    L = grid.box_half
    taper = _taper(grid, 0.9 * L)
    x1 = grid.coords[0]
    out = []
    for rho in (1.0, 2.0):
        out.append(FamilyMember(f"bump_{rho:g}", ScalarField(grid, cutoff_profile(r / rho)[0]), True))
    for s in (1.0, 2.0):
        out.append(FamilyMember(f"gauss_{s:g}", ScalarField(grid, np.exp(-(r / s) ** 2)), True))
    osc = np.cos(2.0 * x1) * np.exp(-(r**2) / 4.0)
    out.append(FamilyMember("osc_gauss", ScalarField(grid, np.broadcast_to(osc, grid.shape)), True))
    for a in (0.5, 1.0, 2.0):
        # (1+|x|)^-a is in L^{9/2}(R^3) exactly when 9a/2 > 3.
        out.append(FamilyMember(f"power_{a:g}", ScalarField(grid, (1.0 + r) ** (-a) * taper), a > 2.0 / 3.0))
    return out


def embedding_suite(
    grid: Grid3 | None = None,
    family=None,
    params: MorreyParams | None = None,
    r=4.5,
    delta=None,
    gamma_pair=(0.5, 1.0),
) -> EmbeddingReport:
    """Fitted constants for the embedding chains between Lebesgue, weighted and Morrey spaces.

    Radii stop at ``0.45 L`` so tapered members coincide with their untapered
    profile on every ball. Members failing the decay margin are dropped and
    listed. Bounds that follow from Hölder's inequality are checked with a
    5% allowance for the discrete ball volume; bounds that are identities of
    the quadrature are checked to 1e-12.
    """
    params = params or MorreyParams(3.0, 1.0)
    p, gamma = params.p, params.gamma
    if not p < r:
        raise DomainError("need p < r")
    if family is None:
        if grid is None:
            raise DomainError("pass a grid or an explicit family")
        family = default_family(grid)
    if delta is None:
        delta = min(gamma + 0.5, 2.999)
    members, dropped = [], []
    for m in family:
        rep = decay_margin(m.field)
        if rep.contaminated:
            dropped.append((m.name, f"decay margin ratio {rep.ratio:.3e}"))
        else:
            members.append(m)
    if not members:
        raise DomainError("every family member failed the decay margin")
    g = members[0].field.grid
    radii = geometric_ladder(g.box_half, top=0.45)
    dlt = 3.0 * (1.0 - p / r)  # Morrey index of the homogeneous space
    holder_hom = (4.0 * np.pi / 3.0) ** (1.0 / p - 1.0 / r)
    holder_ball = (4.0 * np.pi / 3.0) ** (1.0 - p / r)

    ratios = {k: {} for k in (
        "weighted_to_local", "local_to_weighted_delta", "lebesgue_to_homogeneous",
        "homogeneous_to_local", "appendix_b_ball_bound", "riesz_local",
    )}
    decay = {}
    mono = True
    p_dlt = MorreyParams(p, dlt)
    g1, g2 = gamma_pair
    for m in members:
        f = m.field
        loc = local_morrey_norm(f, params, radii).value
        w_g = weighted_lebesgue_norm(f, p, gamma)
        w_d = weighted_lebesgue_norm(f, p, delta)
        lr = lp_norm(f, r)
        hom = homogeneous_morrey_norm(f, p, r, radii).value
        loc_dlt = local_morrey_norm(f, p_dlt, radii).value
        balls = ball_integrals(f, radii, p).smoothed
        ratios["weighted_to_local"][m.name] = _ratio(loc, w_g)
        ratios["local_to_weighted_delta"][m.name] = _ratio(w_d, loc)
        ratios["lebesgue_to_homogeneous"][m.name] = _ratio(hom, lr)
        ratios["homogeneous_to_local"][m.name] = _ratio(loc_dlt, hom)
        ratios["appendix_b_ball_bound"][m.name] = max(
            _ratio(b, R ** (3.0 * (1.0 - p / r)) * lr**p) for b, R in zip(balls, radii)
        )
        rz = np.sqrt(sum(riesz(f, i).data ** 2 for i in range(3)))
        ratios["riesz_local"][m.name] = _ratio(
            local_morrey_norm(ScalarField(g, rz), params, radii).value, loc
        )
        n1 = local_morrey_norm(f, MorreyParams(p, g1), radii).value
        n2 = local_morrey_norm(f, MorreyParams(p, g2), radii).value
        mono = mono and n2 <= n1
        prof = annulus_profile(f, params, radii)
        if prof.decaying:
            verdict = "certified"
        elif m.in_L92 and prof.values.size >= 3 and strictly_increasing(prof.values[-3:]):
            verdict = "violated"
        else:
            verdict = "not_certified"
        decay[m.name] = verdict

    h = g.h
    bounds = {
        # On B_R, (1+|x|)^-gamma >= (2 + h)^-gamma R^-gamma for R >= 1 (ramp reaches R + h/2).
        "weighted_to_local": ((2.0 + h) ** (gamma / p), 1e-12),
        "local_to_weighted_delta": (None, 0.0),
        "lebesgue_to_homogeneous": (holder_hom, 0.05),
        "homogeneous_to_local": (1.0, 1e-12),
        "appendix_b_ball_bound": (holder_ball, 0.05),
        "riesz_local": (None, 0.0),
    }
    constants = {}
    for name, rs in ratios.items():
        arg = max(rs, key=rs.get)
        bound, slack = bounds[name]
        constants[name] = FittedConstant(name, float(rs[arg]), arg, dict(rs), bound, slack)
    return EmbeddingReport(params, float(r), float(delta), [m.name for m in members], dropped, constants, bool(mono), decay)


# ---------------------------------------------------------------------------
# Riesz transforms and pressure reconstruction


RIESZ_TOL = 1e-12
RIESZ_IDENTITY_TOL = 1e-10
POISSON_TOL = 1e-8


@dataclass(frozen=True)
class RieszReport:
    """Worst errors of the Riesz calculus on single modes and random fields."""

    n: int
    seeds: tuple
    single_mode_error: float
    identity_error: float
    poisson_residual: float
    tolerances: dict

    @property
    def holds(self):
        t = self.tolerances
        return (
            self.single_mode_error <= t["riesz"]
            and self.identity_error <= t["riesz_identity"]
            and self.poisson_residual <= t["poisson"]
        )


SINGLE_MODES = ((1, 0, 0), (0, 2, 0), (1, 1, 1), (3, -2, 1), (-4, 5, 2))


def riesz_battery(grid: Grid3, seeds=range(10), tol=None) -> RieszReport:
    """Single-mode Riesz errors, ``sum_i R_i R_i = -Id`` and the pressure Poisson residual.

    A mode ``cos(k·x)`` must map to ``-(k_i/|k|) sin(k·x)``. The identity is
    tested on mean-free random fields, the Poisson residual on a random
    divergence-free velocity with a random unit director per seed.
    """
    tolerances = {"riesz": RIESZ_TOL, "riesz_identity": RIESZ_IDENTITY_TOL, "poisson": POISSON_TOL}
    tolerances.update(tol or {})
    plan = plan_for(grid)
    x = grid.coords
    unit = math.pi / grid.box_half
    single = 0.0
    for m in SINGLE_MODES:
        k = [unit * mi for mi in m]
        phase = np.broadcast_to(sum(ki * xi for ki, xi in zip(k, x)), grid.shape)
        f = ScalarField(grid, np.cos(phase))
        kn = math.sqrt(sum(ki * ki for ki in k))
        for i in range(3):
            got = riesz(f, i, plan).data
            single = max(single, float(np.abs(got + (k[i] / kn) * np.sin(phase)).max()))
    ident = 0.0
    poisson = 0.0
    seeds = tuple(int(s) for s in seeds)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        f = random_smooth(grid, rng, 1, kmax=6)
        f -= f.mean()
        fs = ScalarField(grid, f)
        acc = sum(riesz(riesz(fs, i, plan), i, plan).data for i in range(3))
        ident = max(ident, float(np.abs(acc + f).max()))
        u = leray_project(VectorField(grid, random_smooth(grid, rng, 3, kmax=4)), plan)
        w = random_smooth(grid, rng, 3, kmax=3)
        w[2] += 1.5
        w /= np.sqrt(_sq(w))
        gv = jacobian(VectorField(grid, w))
        poisson = max(poisson, pressure_q(u, gv, plan=plan).poisson_residual)
    return RieszReport(grid.n, seeds, single, ident, poisson, tolerances)


# ---------------------------------------------------------------------------
# Improved Sobolev inequality


@dataclass(frozen=True)
class SobolevReport:
    l4: float
    h1: float
    besov: float
    ratio: float
    degenerate: bool
    wraparound: bool
    boundary_contaminated: bool


def improved_sobolev_check(u, strict=False) -> SobolevReport:
    """``||u||_4 / (||u||_{H1}^(1/2) ||u||_{B^-1}^(1/2))`` for a decaying field."""
    rep = decay_margin(u)
    if rep.contaminated and strict:
        raise BoundaryContaminationError(f"field reaches {rep.ratio:.3e} of its max near the boundary")
    l4 = lp_norm(u, 4.0)
    if isinstance(u, VectorField):
        h1 = math.sqrt(float(np.sum(jacobian(u).data ** 2)) * u.grid.cell_volume)
    else:
        h1 = math.sqrt(float(np.sum(gradient(u).data ** 2)) * u.grid.cell_volume)
    b = besov_minus1_norm(u)
    den = math.sqrt(h1 * b.value)
    if den == 0.0:
        return SobolevReport(l4, h1, b.value, 0.0, True, b.wraparound, rep.contaminated)
    return SobolevReport(l4, h1, b.value, l4 / den, False, b.wraparound, rep.contaminated)


# ---------------------------------------------------------------------------
# Liouville harness


VERDICT_CONSISTENT = "consistent"
VERDICT_COUNTEREXAMPLE = "counterexample_flag"
VERDICT_NOT_MET = "hypotheses_not_met"


@dataclass(frozen=True)
class LiouvilleVerdict:
    hypotheses: dict
    conclusion: dict
    verdict: str
    tol: float

    @property
    def holds(self):
        return self.verdict != VERDICT_COUNTEREXAMPLE


def liouville_rule(hypotheses: dict, conclusion: dict, tol=LIOUVILLE_TOL) -> str:
    """Verdict from the two records alone.

    The hypotheses hold when ``u`` passes the annulus decay proxy, the
    gradient of ``v`` has a finite Morrey norm and finite shell energies, and,
    for ``eta > 0``, the rescaled profile also decays. Then a candidate with
    ``max |u| > tol`` is flagged as a counterexample.
    """
    met = (
        hypotheses["u_decay"]
        and hypotheses["grad_v_morrey_finite"]
        and hypotheses["grad_v_shell_energy_finite"]
    )
    if hypotheses["eta"] > 0:
        met = met and hypotheses["u_scaled_decay"]
    if not met:
        return VERDICT_NOT_MET
    return VERDICT_COUNTEREXAMPLE if conclusion["max_u"] > tol else VERDICT_CONSISTENT


def liouville_check(
    s: StationaryState,
    params: MorreyParams,
    radii=None,
    tol=LIOUVILLE_TOL,
    residual_tol=RESIDUAL_TOL,
    scheme="spectral",
) -> LiouvilleVerdict:
    """Test the decay hypotheses on a stationary solution and record its size."""
    res = stationary_residual(s, scheme=scheme)
    if res.max_total > residual_tol:
        raise PreconditionError(
            f"stationary residual {res.max_total:.3e} exceeds {residual_tol:g}",
            residual=res.max_total,
        )
    grid = s.grid
    _, gv = _state_derivatives(s, scheme)
    gv_mag = ScalarField(grid, np.sqrt(_sq(gv)))
    if radii is None:
        radii = geometric_ladder(grid.box_half)
    prof_u = annulus_profile(s.u, params, radii)
    norm_v = local_morrey_norm(gv_mag, params, radii)
    shell_v = annulus_profile(gv_mag, params, radii, shell_energy=True)
    mask = s.window_mask()
    if s.exact is not None:
        grad_p = s.exact.grad_p.data
    else:
        grad_p = gradient(s.p, scheme).data
    hyp = {
        "gamma": params.gamma,
        "p": params.p,
        "eta": params.eta,
        "eta_nonpositive": bool(params.eta <= 0),
        "radii": [float(x) for x in prof_u.radii],
        "u_profile": [float(x) for x in prof_u.values],
        "u_scaled_profile": [float(x) for x in prof_u.scaled_values],
        "u_decay": bool(prof_u.decaying),
        "u_scaled_decay": bool(prof_u.scaled_decaying),
        "u_profile_increasing": strictly_increasing(prof_u.values),
        "grad_v_morrey": norm_v.value,
        "grad_v_morrey_finite": bool(math.isfinite(norm_v.value)),
        "grad_v_shell_energy_sup": shell_v.shell_energy_sup,
        "grad_v_shell_energy_finite": bool(math.isfinite(shell_v.shell_energy_sup)),
        "boundary_contaminated": bool(prof_u.boundary_contaminated),
    }
    concl = {
        "max_u": float(np.where(mask, s.u.magnitude(), 0.0).max()),
        "max_grad_v": float(np.where(mask, np.sqrt(_sq(gv)), 0.0).max()),
        "max_grad_p": float(np.where(mask, np.sqrt(_sq(grad_p)), 0.0).max()),
        "residual": res.max_total,
    }
    return LiouvilleVerdict(hyp, concl, liouville_rule(hyp, concl, tol), tol)
