import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from elmorrey.errors import BoundaryContaminationError, ConfigurationError, DomainError
from elmorrey.fieldio import read_field, sample_path
from elmorrey.grid import Grid3, ScalarField, VectorField, cutoff_profile
from elmorrey.morrey import (
    REGION_NONPOSITIVE,
    REGION_POSITIVE,
    REGION_UNDEFINED,
    MorreyParams,
    annulus_profile,
    classify,
    decay_rule,
    eta,
    eta_exact,
    eta_region_map,
    geometric_ladder,
    homogeneous_morrey_norm,
    local_morrey_norm,
    strictly_increasing,
    threshold_gamma,
    weighted_lebesgue_norm,
    write_eta_csv,
    write_profile_csv,
)
from oracles import bump, radial_ladder_max, radial_morrey_sup, radial_weighted_norm

GOLDEN = json.loads(sample_path("bump.golden.json").read_text())


def test_eta_anchor_is_exactly_zero():
    assert eta_exact(1, 3) == 0
    assert eta(1.0, 3.0) == 0.0
    assert classify(1.0, 3.0).region == REGION_NONPOSITIVE


def test_eta_formula():
    assert eta_exact(Fraction(1, 2), 4) == Fraction(1, 2) / 4 - Fraction(3, 4) + Fraction(2, 3)
    assert eta(2.9, 100.0) == pytest.approx(2.9 / 100 - 3 / 100 + 2 / 3)
    with pytest.raises(DomainError):
        eta_exact(1, 0)


@given(st.fractions(min_value=3, max_value=Fraction(9, 2), max_denominator=1000))
def test_threshold_curve_is_sign_boundary(p):
    assume(p < Fraction(9, 2))
    g = threshold_gamma(p)
    assert eta_exact(g, p) == 0
    delta = Fraction(1, 10**9)
    assert eta_exact(g - delta, p) < 0 < eta_exact(g + delta, p)


@given(st.floats(0.01, 2.99), st.floats(3.0, 50.0))
def test_classification_matches_sign(gamma, p):
    pt = classify(gamma, p)
    assert pt.region == (REGION_NONPOSITIVE if eta_exact(gamma, p) <= 0 else REGION_POSITIVE)


def test_undefined_region_and_params_domain():
    assert classify(3.5, 4.0).region == REGION_UNDEFINED
    assert classify(1.0, 2.0).region == REGION_UNDEFINED
    with pytest.raises(DomainError):
        MorreyParams(2.0, 1.0)
    with pytest.raises(DomainError):
        MorreyParams(3.0, 0.0)


def test_region_map_order_and_csv(tmp_path):
    pts = eta_region_map([0.5, 1.0], [3.0, 4.0])
    assert [(p.gamma, p.p) for p in pts] == [(0.5, 3.0), (1.0, 3.0), (0.5, 4.0), (1.0, 4.0)]
    path = write_eta_csv(pts, tmp_path / "e.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "gamma,p,eta,region"
    assert lines[2] == "1.0,3.0,0.0,eta_nonpositive"


def test_geometric_ladder():
    r = geometric_ladder(10.0, base=2.0)
    assert list(r) == [1.0, 2.0, 4.0, 8.0, 9.0]
    with pytest.raises(ConfigurationError):
        geometric_ladder(10.0, base=1.0)
    with pytest.raises(DomainError):
        geometric_ladder(0.5)


def test_zero_field_has_zero_norm():
    g = Grid3(32, 4.0)
    f = ScalarField(g, np.zeros(g.shape))
    n = local_morrey_norm(f, MorreyParams(3.0, 1.0))
    assert n.value == 0.0
    assert not n.edge_flag
    prof = annulus_profile(f, MorreyParams(3.0, 1.0))
    assert prof.decaying  # ends at exactly zero


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_norm_is_absolutely_homogeneous(c):
    f = read_field(sample_path())
    params = MorreyParams(3.0, 1.0)
    a = local_morrey_norm(f, params).value
    b = local_morrey_norm(ScalarField(f.grid, c * f.data), params).value
    assert b == pytest.approx(abs(c) * a, rel=1e-12)


@given(st.floats(0.05, 2.9), st.floats(0.05, 2.9), st.floats(3.0, 8.0))
def test_gamma_monotonicity_is_exact(g1, g2, p):
    g1, g2 = sorted((g1, g2))
    f = read_field(sample_path())
    a = local_morrey_norm(f, MorreyParams(p, g1)).value
    b = local_morrey_norm(f, MorreyParams(p, g2)).value
    assert b <= a


def test_bump_norm_matches_golden_and_radial_oracle():
    f = read_field(sample_path())
    params = MorreyParams(GOLDEN["p"], GOLDEN["gamma"])
    radii = np.asarray(GOLDEN["radii"])
    val = local_morrey_norm(f, params, radii).value
    assert val == pytest.approx(GOLDEN["local_norm"], rel=1e-12)
    rho = GOLDEN["field"]["rho"]

    def prof(r):
        return bump(r / rho)

    sup = radial_morrey_sup(prof, 3.0, 1.0, float(radii[-1]), (rho / 2, rho))
    assert abs(val / sup - 1) < 0.02
    assert abs(val / radial_ladder_max(prof, 3.0, 1.0, radii, (rho / 2, rho)) - 1) < 0.01


def test_weighted_norm_matches_radial_oracle():
    f = read_field(sample_path())
    rho = GOLDEN["field"]["rho"]
    w = weighted_lebesgue_norm(f, 3.0, 1.0)
    assert w == pytest.approx(GOLDEN["weighted_norm"], rel=1e-12)
    ref = radial_weighted_norm(lambda r: bump(r / rho), 3.0, 1.0, rho, (rho / 2,))
    assert w == pytest.approx(ref, rel=1e-3)


def test_weighted_controls_local_norm():
    # On B_R with R >= 1, (1 + |x|)^-gamma >= (2 + h)^-gamma R^-gamma.
    f = read_field(sample_path())
    g = f.grid
    for gamma in (0.5, 1.0, 2.0):
        loc = local_morrey_norm(f, MorreyParams(3.0, gamma)).value
        w = weighted_lebesgue_norm(f, 3.0, gamma)
        assert loc <= (2 + g.h) ** (gamma / 3.0) * w


def test_homogeneous_norm_at_scale_matches_local():
    g = Grid3(32, 6.0)
    f = ScalarField(g, np.exp(-g.radius**2))
    radii = geometric_ladder(g.box_half, top=0.45)
    p, r = 3.0, 4.5
    hom = homogeneous_morrey_norm(f, p, r, radii)
    assert hom.value > 0
    assert hom.radius in radii
    # The supremum over centres is at least the value at the origin.
    delta = 3 * (1 - p / r)
    loc = local_morrey_norm(f, MorreyParams(p, delta), radii).value
    assert hom.value >= loc * (1 - 1e-12)


def test_decay_guard():
    g = Grid3(32, 2.0)
    f = ScalarField(g, np.ones(g.shape))
    with pytest.raises(BoundaryContaminationError):
        local_morrey_norm(f, MorreyParams(3.0, 1.0), strict=True)
    assert local_morrey_norm(f, MorreyParams(3.0, 1.0)).boundary_contaminated


def test_decay_rule_cases():
    assert decay_rule([5, 4, 3, 0.0])
    assert decay_rule([10, 3, 2, 0.5])
    assert not decay_rule([10, 3, 2, 1.5])  # last value too large
    assert not decay_rule([1, 2, 3])
    assert not decay_rule([])
    assert strictly_increasing([1, 2, 3])
    assert not strictly_increasing([1, 1, 3])


def test_annulus_profile_of_growing_field_increases(tmp_path):
    g = Grid3(64, 4.5)
    x1, x2, x3 = g.coords
    u = VectorField.from_components(g, (2 * x1, 2 * x2, -4 * x3))
    prof = annulus_profile(u, MorreyParams(3.0, 1.0))
    assert strictly_increasing(prof.values)
    assert not prof.decaying
    # eta(1, 3) = 0, so the rescaled profile coincides with a(R).
    assert np.array_equal(prof.values, prof.scaled_values)
    lines = write_profile_csv(prof, tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "R,a,scaled,flag"
    assert len(lines) == prof.radii.size + 1


def test_compact_bump_profile_decays():
    g = Grid3(64, 8.0)
    f = ScalarField(g, cutoff_profile(g.radius / 2.0)[0])
    prof = annulus_profile(f, MorreyParams(3.0, 1.0))
    assert prof.values[-1] == 0.0
    assert prof.decaying
