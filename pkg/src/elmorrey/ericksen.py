"""Simplified Ericksen-Leslie system: residuals, the Appendix-A state, time stepping.

Stationary system::

    -Δu + (u·∇)u + div(∇v ⊙ ∇v) + ∇p = 0,   div u = 0,
    -Δv + (u·∇)v - |∇v|² v = 0,              |v| = 1.

The time-dependent system adds ``∂t u`` and ``∂t v`` with unit viscosity.
The integrator works on Fourier coefficients with an exact diffusion factor
``exp(-|ξ|² dt)`` and Heun (RK2) for the dealiased nonlinear terms. The
pressure is always the Riesz reconstruction of the quadratic stress.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InstabilityError, PreconditionError
from . import kernels
from .kernels import renormalize
from .grid import (
    Grid3,
    ScalarField,
    TensorField,
    VectorField,
    divergence,
    fft,
    ifft,
    jacobian,
    laplacian,
    tensor_divergence,
    gradient,
)
from .spectral import leray_project_spec, plan_for, pressure_from_stress

UNIT_TOL = 1e-10
DIV_TOL = 1e-8
NS_THRESHOLD = 1e-12
CFL_LIMIT = 0.5
SEAM_CELLS = 5


# ---------------------------------------------------------------------------
# Stationary states and residuals


@dataclass(frozen=True, eq=False)
class ExactDerivatives:
    """Closed-form derivatives of a state, used instead of numerical ones."""

    grad_u: TensorField
    lap_u: VectorField
    grad_p: VectorField
    grad_v: TensorField
    lap_v: VectorField
    div_stress_v: VectorField


@dataclass(frozen=True, eq=False)
class StationaryState:
    """``(u, p, v)`` on one grid.

    ``window`` (a half-width) restricts every check to the interior cube
    ``max_i |x_i| <= window``; ``None`` means the whole box.
    """

    u: VectorField
    p: ScalarField
    v: VectorField
    exact: ExactDerivatives | None = None
    window: float | None = None

    @property
    def grid(self):
        return self.u.grid

    def window_mask(self):
        g = self.grid
        if self.window is None:
            return np.ones(g.shape, dtype=bool)
        x, y, z = g.coords
        w = self.window * (1 + 1e-12)
        return (np.abs(x) <= w) & (np.abs(y) <= w) & (np.abs(z) <= w)

    def unit_defect(self):
        dev = np.abs(self.v.magnitude() - 1.0)
        dev = np.where(self.window_mask(), dev, 0.0)
        idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
        return float(dev[idx]), idx

    def validate(self, scheme="spectral", unit_tol=UNIT_TOL, div_tol=DIV_TOL):
        """Raise :class:`PreconditionError` naming the worst node on violation."""
        dev, idx = self.unit_defect()
        if dev > unit_tol:
            raise PreconditionError(
                f"|v| deviates from 1 by {dev:.3e} at node {idx} "
                f"(x = {self.grid.point_of(idx)})",
                unit_defect=dev,
                node=idx,
            )
        if self.exact is not None:
            div = np.trace(self.exact.grad_u.data)
        else:
            div = divergence(self.u, scheme).data
        div = np.where(self.window_mask(), np.abs(div), 0.0)
        worst = float(div.max())
        if worst > div_tol:
            idx = np.unravel_index(int(np.argmax(div)), div.shape)
            raise PreconditionError(
                f"div u = {worst:.3e} at node {idx}", max_divergence=worst, node=idx
            )


@dataclass(frozen=True, eq=False)
class StationaryResidual:
    momentum: VectorField
    director: VectorField
    div_defect: ScalarField
    max_momentum: float
    max_director: float
    max_div: float

    @property
    def max_total(self):
        return max(self.max_momentum, self.max_director, self.max_div)


def advection(u: VectorField, grad_w: TensorField) -> np.ndarray:
    """``(u·∇)w`` given ``grad_w`` with entries ``d_j w_i`` at ``(j, i)``."""
    return np.einsum("j...,ji...->i...", u.data, grad_w.data)


def director_stress_divergence(grad_v: TensorField, scheme="spectral") -> VectorField:
    return tensor_divergence(grad_v.self_contraction(), scheme)


def stationary_residual(s: StationaryState, scheme="spectral", use_exact=None, check=True) -> StationaryResidual:
    """Residual fields of the stationary system, maxima over ``s.window``.

    ``use_exact`` (default: whenever ``s.exact`` is set) evaluates the
    closed-form residual from the exact derivative pack.
    """
    if check:
        dev, idx = s.unit_defect()
        if dev > UNIT_TOL:
            raise PreconditionError(
                f"|v| deviates from 1 by {dev:.3e} at node {idx}", unit_defect=dev, node=idx
            )
    if use_exact is None:
        use_exact = s.exact is not None
    g = s.grid
    if use_exact:
        if s.exact is None:
            raise ConfigurationError("state carries no exact derivative pack")
        d = s.exact
        grad_u, lap_u, grad_p = d.grad_u, d.lap_u.data, d.grad_p.data
        grad_v, lap_v, div_vv = d.grad_v, d.lap_v.data, d.div_stress_v.data
    else:
        grad_u = jacobian(s.u, scheme)
        lap_u = laplacian(s.u, scheme).data
        grad_p = gradient(s.p, scheme).data
        grad_v = jacobian(s.v, scheme)
        lap_v = laplacian(s.v, scheme).data
        div_vv = director_stress_divergence(grad_v, scheme).data
    momentum = -lap_u + advection(s.u, grad_u) + div_vv + grad_p
    gv2 = np.einsum("ij...,ij...->...", grad_v.data, grad_v.data)
    director = -lap_v + advection(s.u, grad_v) - gv2 * s.v.data
    div = np.trace(grad_u.data)
    mask = s.window_mask()

    def _max(a):
        a = np.abs(a)
        return float(np.where(mask, a, 0.0).max())

    mom_mag = np.sqrt(np.einsum("i...,i...->...", momentum, momentum))
    dir_mag = np.sqrt(np.einsum("i...,i...->...", director, director))
    return StationaryResidual(
        VectorField(g, momentum),
        VectorField(g, director),
        ScalarField(g, div),
        _max(mom_mag),
        _max(dir_mag),
        _max(div),
    )


def ns_residual(u: VectorField, p: ScalarField) -> VectorField:
    """Navier-Stokes momentum residual in conservative form ``-Δu + div(u ⊗ u) + ∇p``.

    A separate code path from :func:`stationary_residual`, which uses the
    advective form ``(u·∇)u``; the two agree for divergence-free ``u``.
    """
    uu = TensorField(u.grid, np.einsum("i...,j...->ij...", u.data, u.data))
    return VectorField(
        u.grid,
        -laplacian(u).data + tensor_divergence(uu).data + gradient(p).data,
    )


def ns_special_case(v: VectorField | StationaryState, threshold=NS_THRESHOLD, scheme="spectral") -> bool:
    """True when ``max |∇v|`` is at most ``threshold``, i.e. the director is constant."""
    if isinstance(v, StationaryState):
        v = v.v
    return bool(jacobian(v, scheme).magnitude().max() <= threshold)


# ---------------------------------------------------------------------------
# Appendix-A counterexample


@dataclass(frozen=True, eq=False)
class CounterexampleState:
    """The explicit non-trivial stationary solution and its two director branches.

    ``state.v`` uses the cylindrical branch ``(x1, x2, 0)`` only at nodes with
    ``|x1² + x2² - 1| < band`` and the constant branch elsewhere.
    """

    state: StationaryState
    v_cylinder: VectorField
    v_constant: VectorField
    band_mask: np.ndarray
    band: float

    def closed_form_residual(self) -> StationaryResidual:
        return stationary_residual(self.state, use_exact=True)

    def branch_residuals(self, scheme="fd4") -> dict:
        """Numerical residual maxima per branch on the interior window.

        Each director branch is differentiated as a smooth field on its own,
        since the sampled mixture is discontinuous at the band.
        """
        out = {}
        for name, v in (("cylinder", self.v_cylinder), ("constant", self.v_constant)):
            s = replace(self.state, v=v, exact=None)
            r = stationary_residual(s, scheme=scheme, use_exact=False, check=False)
            out[name] = {"momentum": r.max_momentum, "director": r.max_director, "divergence": r.max_div}
        return out

    def max_branch_residual(self, scheme="fd4") -> float:
        return max(max(b.values()) for b in self.branch_residuals(scheme).values())


def counterexample_state(grid: Grid3, window=None, band=1e-12) -> CounterexampleState:
    """Sample ``u = (2x1, 2x2, -4x3)``, ``p = -(2x1² + 2x2² + 8x3²)`` and the director.

    The fields grow linearly/quadratically, so only the interior window is
    meaningful. The default keeps nodes at least five cells from the periodic
    seam: the stress divergence composes two fourth-order stencils, which
    together reach four cells.
    """
    h, L = grid.h, grid.box_half
    if window is None:
        window = L - SEAM_CELLS * h
    if not 0 < window <= L - SEAM_CELLS * h * (1 - 1e-12):
        raise ConfigurationError(f"window {window} must lie strictly inside the box (<= L - {SEAM_CELLS}h)")
    x1, x2, x3 = grid.coords
    shape = grid.shape
    u = VectorField.from_components(grid, (2 * x1, 2 * x2, -4 * x3))
    p = ScalarField(grid, np.broadcast_to(-(2 * x1**2 + 2 * x2**2 + 8 * x3**2), shape))
    s3 = 1.0 / math.sqrt(3.0)
    v_const = VectorField.from_components(grid, (s3, s3, s3))
    v_cyl = VectorField.from_components(grid, (x1, x2, 0.0))
    on = np.broadcast_to(np.abs(x1**2 + x2**2 - 1.0) < band, shape)
    v = np.where(on, v_cyl.data, v_const.data)
    zeros3 = np.zeros((3,) + shape)
    grad_u = np.zeros((3, 3) + shape)
    grad_u[0, 0], grad_u[1, 1], grad_u[2, 2] = 2.0, 2.0, -4.0
    grad_p = np.stack(np.broadcast_arrays(-4 * x1, -4 * x2, -16 * x3))
    # On the cylinder branch grad v = diag(1, 1, 0) is constant; elsewhere it is 0.
    grad_v = np.zeros((3, 3) + shape)
    grad_v[0, 0] = np.where(on, 1.0, 0.0)
    grad_v[1, 1] = np.where(on, 1.0, 0.0)
    exact = ExactDerivatives(
        TensorField(grid, grad_u),
        VectorField(grid, zeros3),
        VectorField(grid, grad_p),
        TensorField(grid, grad_v),
        VectorField(grid, zeros3),
        VectorField(grid, zeros3),
    )
    state = StationaryState(u, p, VectorField(grid, v), exact, window)
    return CounterexampleState(state, v_cyl, v_const, np.asarray(on), band)


def trivial_state(grid: Grid3, direction=(0.0, 0.0, 1.0)) -> StationaryState:
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    zero3 = np.zeros((3,) + grid.shape)
    return StationaryState(
        VectorField(grid, zero3),
        ScalarField(grid, np.zeros(grid.shape)),
        VectorField.from_components(grid, tuple(d)),
    )


# ---------------------------------------------------------------------------
# Time stepping


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters. ``cfl`` switches to ``dt = min(dt, cfl h / max|u0|)``."""

    dt: float = 1e-3
    T: float = 0.5
    dealias: bool = True
    renormalize: bool = True
    viscosity: float = 1.0
    cfl: float | None = None
    snapshot_every: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise ConfigurationError("dt and T must be positive")
        if self.viscosity != 1.0:
            raise ConfigurationError("only unit viscosity is supported")
        if self.cfl is not None and not self.cfl > 0:
            raise ConfigurationError("cfl must be positive")

    def steps_for(self, dt):
        return int(round(self.T / dt))


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    u: VectorField
    v: VectorField
    q: ScalarField | None = None

    @property
    def grid(self):
        return self.u.grid


@dataclass(eq=False)
class EnergyLedger:
    """Time series behind the global energy inequality.

    ``defect`` is ``‖u‖² + 2∫‖∇u‖² + ‖∇v‖² - E(0)``. For smooth solutions the
    exact balance gives ``defect = -2∫‖Δv + |∇v|² v‖²``; ``balance`` adds that
    term back and tends to 0 under refinement.
    """

    t: list = field(default_factory=list)
    ku2: list = field(default_factory=list)
    kdv2: list = field(default_factory=list)
    cum_diss_u: list = field(default_factory=list)
    cum_diss_v: list = field(default_factory=list)
    cum_tension: list = field(default_factory=list)
    defect: list = field(default_factory=list)
    balance: list = field(default_factory=list)

    @property
    def e0(self):
        return self.ku2[0] + self.kdv2[0] if self.t else 0.0

    def append(self, t, ku2, kdv2, du, dv, tension):
        if self.t:
            dt = t - self.t[-1]
            if not dt > 0:
                raise ValueError("ledger times must increase")
            prev = self._last
            cu = self.cum_diss_u[-1] + dt * (du + prev[0])  # 2 * trapezoid
            cv = self.cum_diss_v[-1] + 0.5 * dt * (dv + prev[1])
            ct = self.cum_tension[-1] + dt * (tension + prev[2])
        else:
            cu = cv = ct = 0.0
        self._last = (du, dv, tension)
        self.t.append(float(t))
        self.ku2.append(float(ku2))
        self.kdv2.append(float(kdv2))
        self.cum_diss_u.append(float(cu))
        self.cum_diss_v.append(float(cv))
        self.cum_tension.append(float(ct))
        e0 = self.ku2[0] + self.kdv2[0]
        d = ku2 + cu + kdv2 - e0
        self.defect.append(float(d))
        self.balance.append(float(d + ct))

    def arrays(self):
        return {k: np.asarray(getattr(self, k)) for k in COLUMNS + ("cum_tension", "balance")}

    def max_defect(self):
        return float(max(self.defect)) if self.defect else 0.0

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(COLUMNS) + ["balance"])
            for i in range(len(self.t)):
                w.writerow([repr(getattr(self, c)[i]) for c in COLUMNS] + [repr(self.balance[i])])
        return path

    @classmethod
    def read_csv(cls, path):
        led = cls()
        with Path(path).open() as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            for c in COLUMNS:
                getattr(led, c).append(float(r[c]))
            led.balance.append(float(r.get("balance", "nan")))
            led.cum_tension.append(led.balance[-1] - led.defect[-1])
        return led


COLUMNS = ("t", "ku2", "kdv2", "cum_diss_u", "cum_diss_v", "defect")


def _parseval_weights(grid):
    """Weights turning ``sum w |c|^2`` over real-FFT coefficients into ``h^3 sum |f|^2``."""
    n = grid.n
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w * (2.0 * grid.box_half) ** 3 / float(n) ** 6


def spectral_l2sq(spec, grid, weights=None):
    w = _parseval_weights(grid) if weights is None else weights
    return float(np.sum((spec.real**2 + spec.imag**2) * w))


class StepFields:
    """Physical and spectral quantities at one accepted time level.

    Derived quantities are computed on first access and cached.
    """

    def __init__(self, grid, plan, t, uh, vh, u, v, grad_v, q_h, coupled):
        self.grid, self.plan, self.t = grid, plan, t
        self.uh, self.vh, self.u, self.v = uh, vh, u, v
        self.grad_v = grad_v
        self.q_h = q_h
        self.coupled = coupled

    @cached_property
    def q(self):
        return ifft(self.q_h, self.grid)

    @cached_property
    def grad_u(self):
        k = self.plan.k_odd
        return np.stack([ifft(1j * k[a] * self.uh, self.grid) for a in range(3)])

    @cached_property
    def hess_v(self):
        """Entries ``d_a d_b v_c`` at ``[a, b, c]`` (symmetric in a, b)."""
        g = self.grid
        kk = self.plan.k
        ko = self.plan.k_odd
        out = np.empty((3, 3, 3) + g.shape)
        for a in range(3):
            for b in range(a, 3):
                sym = -kk[a] ** 2 if a == b else -ko[a] * ko[b]
                out[a, b] = ifft(sym * self.vh, g)
                out[b, a] = out[a, b]
        return out

    @cached_property
    def lap_v(self):
        return ifft(-self.plan.k2 * self.vh, self.grid)


def _rhs(uh, vh, plan, coupled, dealias):
    """Nonlinear terms in Fourier space plus the fields they were built from."""
    grid = plan.grid
    k = plan.k_odd
    u = ifft(uh, grid)
    if coupled:
        v = ifft(vh, grid)
        gv = ifft(np.stack([1j * k[a] * vh for a in range(3)]), grid)
    else:
        v = gv = None
    S = kernels.stress_products(u, gv)
    Nu, q_h = kernels.momentum_from_stress(fft(S), plan, dealias)
    if coupled:
        Nv = fft(kernels.director_forcing(u, v, gv))
        if dealias:
            Nv *= plan.dealias_mask
    else:
        Nv = None
    return Nu, Nv, (u, v, gv, q_h)


@dataclass(eq=False)
class EvolutionResult:
    final: EvolutionState
    ledger: EnergyLedger
    snapshots: list
    dt: float
    steps: int
    ns_only: bool
    max_divergence: float
    max_unit_defect: float
    cfl_warnings: int


class _Weights:
    """Parseval weights pre-multiplied by the symbols the ledger needs."""

    def __init__(self, plan):
        w = _parseval_weights(plan.grid)
        self.w = w
        self.w_k2 = w * plan.k2_odd
        self.w_k4 = w * plan.k2**2


def _power(spec):
    return spec.real**2 + spec.imag**2


def _diagnostics(sf: StepFields, wt: _Weights):
    pu = _power(sf.uh)
    ku2 = float(np.sum(pu * wt.w))
    du = float(np.sum(pu * wt.w_k2))
    if sf.coupled:
        pv = _power(sf.vh)
        kdv2 = float(np.sum(pv * wt.w_k2))
        dv = float(np.sum(pv * wt.w_k4))
        gv2 = np.einsum("ab...,ab...->...", sf.grad_v, sf.grad_v)
        tension = float(np.sum((sf.lap_v + gv2 * sf.v) ** 2) * sf.grid.cell_volume)
    else:
        kdv2 = dv = tension = 0.0
    return ku2, kdv2, du, dv, tension


def evolve(state0: EvolutionState | StationaryState, cfg: SolverConfig, probes=()) -> EvolutionResult:
    """Integrate the time-dependent system from ``state0`` up to ``cfg.T``.

    Every probe's ``record(step_fields)`` is called at each accepted time
    level, including ``t = 0``.
    """
    grid = state0.u.grid
    plan = plan_for(grid)
    t0 = float(getattr(state0, "t", 0.0))
    u0, v0 = state0.u, state0.v
    vmag = v0.magnitude()
    if np.abs(vmag - 1.0).max() > 1e-8:
        raise PreconditionError("initial director is not unit length", unit_defect=float(np.abs(vmag - 1).max()))
    div0 = np.abs(divergence(u0).data).max()
    if div0 > DIV_TOL * max(1.0, float(u0.magnitude().max()) / grid.h):
        raise PreconditionError(f"initial velocity divergence {div0:.3e}", max_divergence=float(div0))
    coupled = not ns_special_case(v0)

    dt = cfg.dt
    umax = float(u0.magnitude().max())
    if cfg.cfl is not None and umax > 0:
        dt = min(dt, cfg.cfl * grid.h / umax)
    steps = max(int(math.ceil(cfg.T / dt - 1e-9)), 1)
    dt = cfg.T / steps

    uh = fft(u0.data)
    if cfg.dealias:
        uh *= plan.dealias_mask
    uh = leray_project_spec(uh, plan)
    v = np.array(v0.data, dtype=np.float64, copy=True)
    vh = fft(v) if coupled else None
    E = np.exp(-plan.k2 * dt)
    weights = _Weights(plan)

    wt_abs = np.full(grid.n // 2 + 1, 2.0)
    wt_abs[0] = wt_abs[-1] = 1.0
    ledger = EnergyLedger()
    snapshots = []
    max_div = 0.0
    max_unit = float(np.abs(vmag - 1.0).max())
    cfl_warn = 0

    if not coupled:
        const_vh = fft(v)
        const_gv = np.zeros((3, 3) + grid.shape)

    def accept(t, uh, vh, v, nu_stage):
        nonlocal max_div
        u, vv, gv, q_h = nu_stage[2]
        if not coupled:
            vv, vh, gv = v, const_vh, const_gv
        sf = StepFields(grid, plan, t, uh, vh, u, vv, gv, q_h, coupled)
        ledger.append(t, *_diagnostics(sf, weights))
        # Sum of coefficient moduli bounds max |div u| without an inverse transform.
        dh = plan.k_odd[0] * uh[0] + plan.k_odd[1] * uh[1] + plan.k_odd[2] * uh[2]
        div = float(np.sum(np.abs(dh) * wt_abs)) / grid.n**3
        max_div = max(max_div, div)
        for pr in probes:
            pr.record(sf)
        return sf

    t = t0
    stage = _rhs(uh, vh, plan, coupled, cfg.dealias)
    sf = accept(t, uh, vh, v, stage)
    last = EvolutionState(t, VectorField(grid, stage[2][0]), VectorField(grid, v.copy()), ScalarField(grid, sf.q))
    if cfg.snapshot_every:
        snapshots.append(last)
    for step in range(1, steps + 1):
        Nu0, Nv0, _ = stage
        ua = E * (uh + dt * Nu0)
        if coupled:
            va = E * (vh + dt * Nv0)
        else:
            va = None
        Nu1, Nv1, _ = _rhs(ua, va, plan, coupled, cfg.dealias)
        uh = E * uh + 0.5 * dt * (E * Nu0 + Nu1)
        uh = leray_project_spec(uh, plan)
        if coupled:
            vh = E * vh + 0.5 * dt * (E * Nv0 + Nv1)
            v = ifft(vh, grid)
            if cfg.renormalize:
                renormalize(v)
                vh = fft(v)
        t = t0 + step * dt
        if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(v))):
            raise InstabilityError(f"non-finite values at t = {t:.6g}", state=last)
        if coupled:
            max_unit = max(max_unit, float(np.abs(np.sqrt(np.einsum("i...,i...->...", v, v)) - 1.0).max()))
        stage = _rhs(uh, vh, plan, coupled, cfg.dealias)
        u_phys = stage[2][0]
        umax = float(np.sqrt(np.einsum("i...,i...->...", u_phys, u_phys)).max())
        if umax * dt / grid.h > CFL_LIMIT:
            cfl_warn += 1
        sf = accept(t, uh, vh, v, stage)
        last = EvolutionState(t, VectorField(grid, u_phys), VectorField(grid, v.copy()), ScalarField(grid, sf.q))
        if cfg.snapshot_every and step % cfg.snapshot_every == 0:
            snapshots.append(last)
    if cfl_warn:
        warnings.warn(f"CFL number exceeded {CFL_LIMIT} on {cfl_warn} steps", RuntimeWarning, stacklevel=2)
    return EvolutionResult(last, ledger, snapshots, dt, steps, not coupled, max_div, max_unit, cfl_warn)


def ns_step(uh, dt, plan, dealias=True):
    """One Navier-Stokes step of the same integrator, written in advective form.

    Reference for :func:`evolve` with a constant director: the nonlinear term
    is ``-P[(u·∇)u]`` built from ``u`` and ``∇u`` instead of the stress
    divergence plus reconstructed pressure.
    """
    grid = plan.grid
    E = np.exp(-plan.k2 * dt)

    def N(wh):
        u = ifft(wh, grid)
        k = plan.k_odd
        gu = np.stack([ifft(1j * k[a] * wh, grid) for a in range(3)])
        adv = fft(np.einsum("j...,ji...->i...", u, gu))
        if dealias:
            adv *= plan.dealias_mask
        return -leray_project_spec(adv, plan)

    n0 = N(uh)
    a = E * (uh + dt * n0)
    out = E * uh + 0.5 * dt * (E * n0 + N(a))
    return leray_project_spec(out, plan)
