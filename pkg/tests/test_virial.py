import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twowave.errors import UnsupportedDimension, UnsupportedRegime
from twowave.functionals import FieldPair, PhysParams, energy, kinetic_parts, rescale, scaling_coefficients
from twowave.initial import gaussian_pair, random_smooth_pair, seeded_c1_pair
from twowave.radial import make_grid, sphere_area
from twowave.virial import (blowup_J, classify_blowup, classify_from_evidence, envelope, holder_bound,
                            predicted_vanishing_time, vanishing_time, virial_G, virial_Gp, virial_Gpp)


@pytest.fixture(scope="module")
def g():
    return make_grid(2001, 16.0, 5.0)


def test_G_zero_and_gamma_oracle(g):
    p = PhysParams()
    zeros = np.zeros(g.n_points)
    assert virial_G(FieldPair(zeros, zeros, g), p) == 0.0
    pair = FieldPair(np.exp(-0.5 * g.r**2), zeros, g)
    oracle = sphere_area(5.0) * math.gamma(3.5) / 2
    assert virial_G(pair, p) == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx(2.5 * math.pi**2.5, rel=1e-14)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.7, 1.6))
def test_G_scaling(lam):
    g = make_grid(1601, 16.0, 5.0)
    pair = gaussian_pair(g, 1.0, -0.8, width=1.1)
    p = PhysParams()
    assert virial_G(rescale(pair, lam), p) == pytest.approx(virial_G(pair, p) / lam**2, rel=1e-5)


def test_Gp_real_pair_is_zero(g, gs_var, params):
    assert virial_Gp(gaussian_pair(g, 2.0, -1.0), PhysParams()) == 0.0
    assert blowup_J(gs_var.pair, params) == 0.0


def test_Gp_chirp_sign(g):
    p = PhysParams()
    # a positive chirp exp(i c r^2) moves mass outward
    assert virial_Gp(gaussian_pair(g, 1.0, -1.0, chirp=0.3), p) > 0
    assert virial_Gp(gaussian_pair(g, 1.0, -1.0, chirp=-0.3), p) < 0


def test_Gpp_forms_agree_at_resonance(g):
    rng = np.random.default_rng(11)
    for _ in range(5):
        pair = random_smooth_pair(rng, g, complex_valued=True)
        gen, res = virial_Gpp(pair, PhysParams())
        assert res is not None
        assert abs(gen - res) <= 1e-10 * abs(gen)


def test_Gpp_off_resonance_has_no_resonant_form(g):
    gen, res = virial_Gpp(gaussian_pair(g, 1.0, -1.0), PhysParams(m2=3.0))
    assert res is None and math.isfinite(gen)


def test_Gpp_n4_is_energy():
    g = make_grid(1601, 16.0, 4.0)
    p = PhysParams(dim=4.0)
    rng = np.random.default_rng(3)
    for _ in range(3):
        pair = random_smooth_pair(rng, g, complex_valued=True)
        _, res = virial_Gpp(pair, p)
        E = energy(pair, p)
        assert res == pytest.approx(4 / p.m1 * E, rel=1e-8)


def test_vanishing_time_examples():
    assert vanishing_time(1.0, 0.0, -1.0, 1.0, 4.0) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert vanishing_time(1.0, 0.5, 1.0, 1.0, 4.0) is None
    assert vanishing_time(1.0, 0.0, 1.0, 1.0, 4.0) is None
    # tangency: G'(0)^2 = 4 a G(0) with a = (N/2 m1) E0 = 2
    assert vanishing_time(1.0, -math.sqrt(8.0), 1.0, 1.0, 4.0) == pytest.approx(math.sqrt(8.0) / 4, rel=1e-7)
    assert vanishing_time(1.0, -2.0, 0.0, 1.0, 4.0) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(G0=st.floats(0.1, 100.0), Gp0=st.floats(-50.0, 50.0), E0=st.floats(-50.0, -0.01))
def test_negative_energy_always_vanishes(G0, Gp0, E0):
    T = vanishing_time(G0, Gp0, E0, 1.0, 5.0)
    assert T is not None and T > 0
    assert abs(envelope(T, G0, Gp0, E0, 1.0, 5.0)) <= 1e-8 * max(G0, abs(Gp0) * T)


def test_classify_from_evidence():
    assert classify_from_evidence(-1.0, 0.0, 0.0, 1e-12) == "C1"
    assert classify_from_evidence(0.0, 1.0, 0.0, 1e-12) == "C2"
    assert classify_from_evidence(0.0, 0.0, 0.0, 1e-12) is None
    assert classify_from_evidence(1.0, 2.0, 2.0, 1e-12) == "C3"
    assert classify_from_evidence(1.0, 1.0, 2.0, 1e-12) is None


def test_classify_c1_gaussian(g):
    p = PhysParams()
    crit = classify_blowup(gaussian_pair(g, 8.0, -8.0), p)
    assert crit.variant == "C1" and crit.E0 < 0
    assert crit.T_star == pytest.approx(predicted_vanishing_time(gaussian_pair(g, 8.0, -8.0), p))
    assert set(crit.to_dict()) >= {"variant", "E0", "J", "R", "T_star"}


def test_classify_zero_energy_real_pair(g):
    p = PhysParams()
    base = gaussian_pair(g, 1.0, -1.0)
    c = scaling_coefficients(base, p)
    ku, kv = kinetic_parts(base)
    kin = p.a2 / (2 * p.m1) * ku + p.a1 / (4 * p.m2) * kv
    s = kin / c.B  # E(s u, s v) = s^2 kin - s^3 B = 0
    pair = FieldPair(s * base.first, s * base.second, g)
    crit = classify_blowup(pair, p)
    assert abs(crit.E0) <= crit.tol_E
    assert crit.J == 0.0 and crit.variant is None


def test_classify_ground_state(gs_var, params):
    crit = classify_blowup(gs_var.pair, params)
    assert crit.E0 > 0 and crit.J == 0.0 and crit.R > 0
    assert crit.variant is None and crit.T_star is None


def test_classify_regime_checks(g):
    pair = gaussian_pair(g, 8.0, -8.0)
    with pytest.raises(UnsupportedRegime):
        classify_blowup(pair, PhysParams(m2=3.0))
    g6 = make_grid(200, 10.0, 6.0)
    with pytest.raises(UnsupportedDimension):
        classify_blowup(gaussian_pair(g6, 8.0, -8.0), PhysParams(dim=6.0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_holder_bound(seed):
    g = make_grid(600, 14.0, 5.0)
    pair = random_smooth_pair(np.random.default_rng(seed), g, complex_valued=True)
    lhs, rhs = holder_bound(pair, PhysParams())
    assert lhs <= rhs


@pytest.mark.parametrize("seed", range(5))
def test_seeded_c1_data(seed):
    g = make_grid(400, 16.0, 4.0)
    p = PhysParams(dim=4.0)
    pair = seeded_c1_pair(seed, p, g)
    assert classify_blowup(pair, p).variant == "C1"
    again = seeded_c1_pair(seed, p, g)
    np.testing.assert_array_equal(pair.first, again.first)
