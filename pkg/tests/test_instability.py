import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twowave.errors import NoProjection, UnsupportedDimension, UnsupportedRegime, ValidationError
from twowave.evolution import EvolutionConfig
from twowave.functionals import (FieldPair, PhysParams, ScalingCoefficients, action_S, constraint_Q, h1_norm,
                                 interaction, scaling_coefficients)
from twowave.initial import gaussian_pair, random_smooth_pair
from twowave.instability import (InstabilityRunSpec, check_K1, h1_distances, gap_inequality, make_instability_data,
                                 run_instability)
from twowave.radial import make_grid


def negative_q_pair(rng, g, p):
    """Random smooth pair with negative interaction, scaled until Re Q < 0."""
    pair = random_smooth_pair(rng, g, complex_valued=True)
    while interaction(pair) >= 0:
        pair = random_smooth_pair(rng, g, complex_valued=True)
    while constraint_Q(pair, p) >= 0:
        pair = FieldPair(1.5 * pair.first, 1.5 * pair.second, g)
    return pair


def test_near_one_is_close(gs_var):
    pair = make_instability_data(gs_var, 1.001)
    norm = h1_norm(gs_var.xi, gs_var.grid)
    d_phi, d_psi = h1_distances(pair, gs_var)
    assert d_phi <= 1e-2 * norm and d_psi <= 1e-2 * norm


def test_scaled_data_in_k1(gs_var, params):
    pair = make_instability_data(gs_var, 1.2)
    assert constraint_Q(pair, params) < 0
    assert action_S(pair, params) < gs_var.action_M0
    rep = check_K1(pair, params, gs_var.grid, gs_var.action_M0)
    assert rep.member and rep.theta0 > 0


def test_k1_boundary_cases(gs_var, params):
    # Re S equals M0 exactly, so the strict inequality fails
    assert not check_K1(gs_var.pair, params, gs_var.grid, gs_var.action_M0).member
    z = np.zeros(gs_var.grid.n_points)
    rep = check_K1(FieldPair(z, z, gs_var.grid), params, gs_var.grid, gs_var.action_M0)
    assert not rep.member


def test_lambda_must_exceed_one(gs_var):
    with pytest.raises(ValidationError):
        InstabilityRunSpec(1.0)
    with pytest.raises(ValidationError):
        make_instability_data(gs_var, 0.9)


def test_gap_on_scaled_ground_state(gs_var, params):
    rep = gap_inequality(make_instability_data(gs_var, 1.2), params)
    assert rep.applicable and rep.mu < 1 and rep.holds
    assert rep.lhs == pytest.approx(rep.lhs_scaling, rel=1e-4)


def test_gap_equality_on_manifold(params):
    g = make_grid(800, 14.0, 5.0)
    base = gaussian_pair(g, 1.0, -1.0)
    c = scaling_coefficients(base, params)
    s = 2 * c.A / (params.dim * c.B)
    rep = gap_inequality(FieldPair(s * base.first, s * base.second, g), params)
    assert rep.mu == pytest.approx(1.0, abs=1e-12)
    assert abs(rep.rhs) <= 1e-10 * c.A * s**2
    assert rep.holds


def test_gap_random_pairs(params):
    g = make_grid(600, 14.0, 5.0)
    rng = np.random.default_rng(99)
    for _ in range(10):
        rep = gap_inequality(negative_q_pair(rng, g, params), params)
        assert rep.mu < 1 and rep.holds


@settings(max_examples=30, deadline=None)
@given(A=st.floats(0.1, 100.0), mu=st.floats(0.05, 0.999), N=st.floats(4.05, 5.95), C=st.floats(0.0, 10.0))
def test_gap_algebra(A, mu, N, C):
    # with B fixed by A mu^2 = (N/2) B mu^{N/2}, lhs - rhs = B (1 - N/4)(mu^{N/2} - 1) > 0
    B = 2 * A * mu**2 / (N * mu ** (N / 2))
    c = ScalingCoefficients(A, B, C)
    lhs = c.S(1.0, N) - c.S(mu, N)
    rhs = 0.5 * c.Q(1.0, N)
    assert lhs - rhs == pytest.approx(B * (1 - N / 4) * (mu ** (N / 2) - 1), rel=1e-9, abs=1e-12 * (A + B))
    assert lhs >= rhs


def test_gap_needs_negative_interaction(params):
    g = make_grid(200, 10.0, 5.0)
    with pytest.raises(NoProjection):
        gap_inequality(gaussian_pair(g, 1.0, 1.0), params)


def test_run_instability_small_grid(gs_small, params):
    cfg = EvolutionConfig(dt0=1e-3, t_end=2.0, adaptive=True, blowup_threshold=3.0, snapshot_stride=10**6)
    rep = run_instability(InstabilityRunSpec(1.2, cfg), gs_small, params)
    assert rep.termination == "BlowUpDetected" and rep.t_detect is not None
    assert rep.initial_member and rep.passed, rep.violations
    assert rep.assumptions
    d = rep.to_dict()
    assert d["lambda"] == 1.2 and set(d["checks"]) == {"K1_membership", "Q_bound", "Gpp_bound", "blowup"}


@pytest.mark.parametrize("kw,exc", [({"m2": 3.0}, UnsupportedRegime), ({"omega2": 3.0}, UnsupportedRegime),
                                    ({"dim": 4.0}, UnsupportedDimension)])
def test_run_instability_regime(gs_small, kw, exc):
    with pytest.raises(exc):
        run_instability(InstabilityRunSpec(1.2), gs_small, PhysParams(**kw))
