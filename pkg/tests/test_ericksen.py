import math

import numpy as np
import pytest

from elmorrey.errors import ConfigurationError, PreconditionError
from elmorrey.ericksen import (
    EnergyLedger,
    EvolutionState,
    SolverConfig,
    StationaryState,
    counterexample_state,
    director_stress_divergence,
    evolve,
    ns_residual,
    ns_special_case,
    ns_step,
    stationary_residual,
    trivial_state,
)
from elmorrey.grid import Grid3, ScalarField, VectorField, fft, ifft, jacobian, laplacian, random_smooth
from elmorrey.presets import (
    PRESETS,
    angle_of,
    build_state,
    director_from_angle,
    low_mode_field,
    preset,
    taylor_green,
    winding_angle,
)
from elmorrey.spectral import heat_convolve, leray_project, plan_for, poisson_pressure


def test_counterexample_closed_form_is_exact():
    g = Grid3(32, 4.5)
    cs = counterexample_state(g)
    r = cs.closed_form_residual()
    assert r.max_momentum == 0.0
    assert r.max_director == 0.0
    assert r.max_div == 0.0
    assert cs.state.unit_defect()[0] < 1e-15


def test_counterexample_fd4_residual_small_on_window():
    cs = counterexample_state(Grid3(64, 4.5))
    assert cs.max_branch_residual("fd4") <= 1e-8


def test_counterexample_window_validation():
    g = Grid3(32, 4.5)
    with pytest.raises(ConfigurationError):
        counterexample_state(g, window=g.box_half - g.h)
    with pytest.raises(ConfigurationError):
        counterexample_state(g, window=0.0)


def test_trivial_state_and_ns_special_case():
    s = trivial_state(Grid3(16, 2.0), (1.0, 2.0, 2.0))
    r = stationary_residual(s)
    assert r.max_total == 0.0
    assert ns_special_case(s)
    assert not ns_special_case(counterexample_state(Grid3(32, 4.5)).v_cylinder)


def test_stationary_residual_rejects_non_unit_director():
    g = Grid3(16, 2.0)
    s = trivial_state(g)
    bad = StationaryState(s.u, s.p, VectorField(g, 2.0 * s.v.data))
    with pytest.raises(PreconditionError):
        stationary_residual(bad)


def test_conservative_and_advective_forms_agree(g32, rng):
    u = leray_project(VectorField(g32, random_smooth(g32, rng, 3, kmax=3)))
    p = poisson_pressure(u)
    cons = ns_residual(u, p).data
    e3 = VectorField.from_components(g32, (0.0, 0.0, 1.0))
    adv = stationary_residual(StationaryState(u, p, e3), check=False).momentum.data
    assert np.abs(cons - adv).max() < 1e-10
    # The Poisson pressure makes the residual divergence free, so it is pure -Δu + P[(u·∇)u].
    assert np.abs(cons).max() > 0


def test_director_stress_vanishes_for_constant_director(g32):
    e = VectorField.from_components(g32, (0.0, 0.6, 0.8))
    assert np.abs(director_stress_divergence(jacobian(e)).data).max() == 0.0


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(viscosity=2.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(cfl=-1.0)


def test_evolve_preconditions(g32, rng):
    e3 = VectorField.from_components(g32, (0.0, 0.0, 1.0))
    bad_u = VectorField(g32, random_smooth(g32, rng, 3, kmax=3))
    with pytest.raises(PreconditionError):
        evolve(EvolutionState(0.0, bad_u, e3), SolverConfig(T=1e-3))
    zero = VectorField(g32, np.zeros((3,) + g32.shape))
    with pytest.raises(PreconditionError):
        evolve(EvolutionState(0.0, zero, VectorField(g32, 0.5 * e3.data)), SolverConfig(T=1e-3))


def test_zero_preset_stays_zero():
    pr = preset("zero", n=16, T=0.01)
    res = evolve(pr.state(), pr.solver)
    assert np.abs(res.final.u.data).max() == 0.0
    assert res.ns_only
    assert res.ledger.max_defect() == 0.0


def test_evolve_matches_advective_reference_step():
    g = Grid3(32, math.pi)
    u0 = taylor_green(g)
    e3 = VectorField.from_components(g, (0.0, 0.0, 1.0))
    dt, steps = 2e-3, 5
    res = evolve(EvolutionState(0.0, u0, e3), SolverConfig(dt=dt, T=dt * steps))
    plan = plan_for(g)
    uh = fft(u0.data) * plan.dealias_mask
    for _ in range(steps):
        uh = ns_step(uh, dt, plan)
    assert np.abs(ifft(uh, g) - res.final.u.data).max() < 1e-12


def test_taylor_green_decays_and_satisfies_energy_inequality():
    pr = preset("taylor-green", n=32, dt=2e-3, T=0.05)
    res = evolve(pr.state(), pr.solver)
    led = res.ledger
    assert led.ku2[-1] < led.ku2[0]
    assert max(led.defect) <= 1e-3 * led.e0
    assert res.max_divergence < 1e-10


def test_director_winding_angle_follows_heat_equation():
    g = Grid3(32, math.pi)
    alpha0 = winding_angle(g)
    v0 = director_from_angle(g, alpha0)
    zero = VectorField(g, np.zeros((3,) + g.shape))
    T = 0.05
    res = evolve(EvolutionState(0.0, zero, v0), SolverConfig(dt=5e-4, T=T))
    alpha = angle_of(res.final.v).data
    ref = heat_convolve(ScalarField(g, np.broadcast_to(alpha0, g.shape).copy()), T).data
    assert np.abs(alpha - ref).max() < 1e-4 * np.abs(alpha0).max()
    # The stress of a radial twist is a gradient up to the periodic truncation.
    assert np.abs(res.final.u.data).max() < 1e-5
    assert res.max_unit_defect < 1e-12


def test_ledger_csv_roundtrip(tmp_path):
    pr = preset("coupled-small", n=16, dt=1e-3, T=0.005)
    res = evolve(pr.state(), pr.solver)
    path = res.ledger.write_csv(tmp_path / "ledger.csv")
    back = EnergyLedger.read_csv(path)
    assert back.t == res.ledger.t
    assert back.defect == res.ledger.defect
    assert back.balance == res.ledger.balance
    assert path.read_text().splitlines()[0] == "t,ku2,kdv2,cum_diss_u,cum_diss_v,defect,balance"


def test_ledger_rejects_non_increasing_times():
    led = EnergyLedger()
    led.append(0.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        led.append(0.0, 1.0, 1.0, 0.0, 0.0, 0.0)


def test_presets_are_well_formed():
    for name in PRESETS:
        pr = preset(name, n=32)
        st = pr.state()
        assert np.abs(st.v.magnitude() - 1.0).max() < 1e-12
    with pytest.raises(ConfigurationError):
        preset("nope")
    with pytest.raises(ConfigurationError):
        build_state("taylor-green", Grid3(32, 2.0))


def test_low_mode_field_is_grid_independent():
    a = low_mode_field(Grid3(16, math.pi), np.random.default_rng(1), 1, 2, 1.0)
    b = low_mode_field(Grid3(32, math.pi), np.random.default_rng(1), 1, 2, 1.0)
    assert np.abs(b[0, ::2, ::2, ::2] - a[0]).max() < 1e-13
