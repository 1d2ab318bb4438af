import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elmorrey.errors import BoundaryContaminationError, ConfigurationError, DomainError, PreconditionError
from elmorrey.ericksen import EvolutionState, SolverConfig, StationaryState, counterexample_state, evolve, trivial_state
from elmorrey.grid import Grid3, ScalarField, VectorField, random_smooth
from elmorrey.morrey import MorreyParams
from elmorrey.presets import preset
from elmorrey.spectral import leray_project, pressure_q
from elmorrey.verify import (
    VERDICT_CONSISTENT,
    VERDICT_COUNTEREXAMPLE,
    VERDICT_NOT_MET,
    LocalEnergyProbe,
    SupNormProbe,
    caccioppoli_check,
    default_family,
    elliptic_v_check,
    embedding_suite,
    global_energy_check,
    ibp_identity_suite,
    ibp_battery,
    improved_sobolev_check,
    random_solenoidal_state,
    liouville_check,
    liouville_rule,
    local_energy_defect,
    local_energy_report,
    riesz_battery,
    time_cutoff,
)


def _random_state(grid, seed, kmax=3):
    return random_solenoidal_state(grid, seed, kmax=kmax)


def test_ibp_suite_spectral_pairing_is_exact(g64):
    u, v, q = _random_state(g64, 5)
    suite = ibp_identity_suite(u, v, q, 2.0)
    assert suite.holds
    assert suite.max_defect < 1e-7
    expected = {"eq01_viscous", "eq02_laplacian", "cancellation_a", "eq03", "eq04", "tensor_identity", "unit_identity"}
    assert expected <= set(suite.identities)


def test_ibp_battery_small():
    rep = ibp_battery(Grid3(32, math.pi), seeds=range(2), tol=1e-3)
    assert rep.seeds == (0, 1)
    assert rep.holds
    assert rep.worst["cancellation_a"] == 0.0


def test_ibp_suite_sampled_quadrature_converges():
    defects = []
    for n in (32, 64):
        g = Grid3(n, math.pi)
        u, v, q = _random_state(g, 5)
        defects.append(ibp_identity_suite(u, v, q, 2.0, quadrature="sampled").max_defect)
    assert defects[1] < defects[0]


def test_ibp_suite_fd4_derivatives_converge():
    defects = []
    for n in (32, 64):
        u, v, q = _random_state(Grid3(n, math.pi), 2, kmax=2)
        defects.append(ibp_identity_suite(u, v, q, 2.0, scheme="fd4").max_defect)
    # Fourth-order stencils: halving h cuts the defects by close to 16.
    assert defects[1] < defects[0] / 8


def test_ibp_suite_guards(g32):
    u, v, q = _random_state(g32, 1)
    with pytest.raises(BoundaryContaminationError):
        ibp_identity_suite(u, v, q, 4.0)
    with pytest.raises(ConfigurationError):
        ibp_identity_suite(u, v, q, 2.0, quadrature="simpson")


def test_elliptic_check_on_harmonic_map():
    # v = (0, -sin x1, cos x1) solves -Δv = |∇v|² v with |∇v|² = 1, so c(R) = 1/7.
    g = Grid3(64, 4 * math.pi)
    x1 = g.coords[0]
    v = VectorField.from_components(g, (0.0, -np.sin(x1), np.cos(x1)))
    rep = elliptic_v_check(v, radii=[2.0, 4.0, 6.0])
    assert rep.residual < 1e-12
    assert np.all(np.abs(rep.constants - 1 / 7) < 0.02)
    assert not rep.diverging


def test_elliptic_check_refuses_non_solutions(g32, rng):
    w = random_smooth(g32, rng, 3, kmax=2, amplitude=0.5)
    w[2] += 1.0
    v = VectorField(g32, w / np.sqrt(np.einsum("i...,i...->...", w, w)))
    with pytest.raises(PreconditionError):
        elliptic_v_check(v)


@pytest.mark.parametrize("R", [2.0, 4.0])
def test_caccioppoli_on_counterexample(R):
    cs = counterexample_state(Grid3(64, 4.5))
    rep = caccioppoli_check(cs.state, R, MorreyParams(3.0, 1.0))
    # |∇u|² = 24 on the ball of radius R/2.
    assert rep.lhs == pytest.approx(4 * math.pi * R**3, rel=0.05)
    assert rep.holds
    assert rep.residual == 0.0


def test_caccioppoli_refuses_non_solutions(g32, rng):
    u, v, q = _random_state(g32, 3)
    with pytest.raises(PreconditionError):
        caccioppoli_check(StationaryState(u, q, v), 2.0, MorreyParams(3.0, 1.0))


def test_liouville_rule_table():
    base = {"u_decay": True, "grad_v_morrey_finite": True, "grad_v_shell_energy_finite": True,
            "eta": 0.0, "u_scaled_decay": False}
    assert liouville_rule(base, {"max_u": 0.0}) == VERDICT_CONSISTENT
    assert liouville_rule(base, {"max_u": 1.0}) == VERDICT_COUNTEREXAMPLE
    assert liouville_rule({**base, "u_decay": False}, {"max_u": 1.0}) == VERDICT_NOT_MET
    assert liouville_rule({**base, "eta": 0.1}, {"max_u": 1.0}) == VERDICT_NOT_MET
    assert liouville_rule({**base, "eta": 0.1, "u_scaled_decay": True}, {"max_u": 0.0}) == VERDICT_CONSISTENT


def test_liouville_on_counterexample_and_trivial_state():
    cs = counterexample_state(Grid3(64, 4.5))
    ver = liouville_check(cs.state, MorreyParams(3.0, 1.0))
    assert ver.verdict == VERDICT_NOT_MET
    assert ver.hypotheses["u_profile_increasing"]
    assert ver.holds
    triv = liouville_check(trivial_state(Grid3(32, 4.0)), MorreyParams(3.0, 1.0))
    assert triv.verdict == VERDICT_CONSISTENT
    assert triv.conclusion["max_u"] == 0.0


@given(st.floats(0.0, 1.0), st.floats(0.01, 0.2))
def test_time_cutoff_shape(t, eps):
    t0, t1 = 0.3, 0.6
    a, _ = time_cutoff(t, t0, t1, eps)
    assert 0.0 <= a <= 1.0
    if t0 + eps <= t <= t1 + 0.5 * eps:
        assert a == 1.0
    if t <= t0 + 0.5 * eps or t >= t1 + eps:
        assert a == 0.0


def test_time_cutoff_derivative():
    t = np.linspace(0.0, 1.0, 2001)
    a, da = time_cutoff(t, 0.3, 0.6, 0.1)
    num = np.gradient(a, t)
    assert np.abs(num - da).max() < 1e-2 * np.abs(da).max()


def test_local_energy_defect_small_on_smooth_run(tmp_path):
    pr = preset("taylor-green", n=32, dt=2e-3, T=0.06)
    probe = LocalEnergyProbe([1.5, 2.5])
    sup = SupNormProbe()
    res = evolve(pr.state(), pr.solver, probes=[probe, sup])
    rep = local_energy_report(probe, [(0.01, 0.03), (0.02, 0.04)])
    assert rep.max_relative < 1e-3
    assert len(rep.windows) == 4
    assert sup.max_value > 0
    path = probe.write_csv(tmp_path / "le.csv")
    back = LocalEnergyProbe.read_csv(path)
    d0 = local_energy_defect(probe, 0.01, 0.03, 1.5)
    d1 = local_energy_defect(back, 0.01, 0.03, 1.5)
    assert d1.mu == pytest.approx(d0.mu, rel=1e-9, abs=1e-14)
    g = global_energy_check(res.ledger, 1e-3, local=rep)
    assert g.holds
    with pytest.raises(DomainError):
        local_energy_defect(probe, 0.01, 0.059, 1.5)
    with pytest.raises(DomainError):
        local_energy_defect(probe, 0.01, 0.03, 9.0)


def test_riesz_battery_small():
    rep = riesz_battery(Grid3(16, math.pi), seeds=range(2))
    assert rep.holds
    assert rep.single_mode_error < 1e-12


def test_embedding_suite_constants_hold():
    rep = embedding_suite(Grid3(64, 10.0))
    assert rep.gamma_monotone
    assert rep.holds
    assert len(rep.members) == 8


def test_improved_sobolev_on_gaussian():
    g = Grid3(32, 8.0)
    f = ScalarField(g, np.exp(-g.radius**2))
    rep = improved_sobolev_check(f)
    assert not rep.degenerate
    assert 0 < rep.ratio < 10
    zero = improved_sobolev_check(ScalarField(g, np.zeros(g.shape)))
    assert zero.degenerate
    with pytest.raises(BoundaryContaminationError):
        improved_sobolev_check(ScalarField(g, np.ones(g.shape)), strict=True)


def test_power_law_with_a_one_decays_in_m31():
    # (1 + |x|)^-1 is in L^{9/2}. Its M^3_1 annulus value obeys
    # a(R) = R^-1 int_{R/2}^{R} 4 pi r^2 (1 + r)^-3 dr < 4 pi ln 2 / R, so it decays.
    from elmorrey.morrey import annulus_profile, geometric_ladder

    g = Grid3(64, 10.0)
    member = {m.name: m for m in default_family(g)}["power_1"]
    assert member.in_L92
    prof = annulus_profile(member.field, MorreyParams(3.0, 1.0), geometric_ladder(g.box_half, top=0.9))
    tail = prof.values[-4:]
    assert np.all(np.diff(tail) < 0)
    assert np.all(prof.values <= 1.01 * 4 * math.pi * math.log(2) / prof.radii)
