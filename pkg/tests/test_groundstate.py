import math

import numpy as np
import pytest

from twowave.errors import DataFileError, TrivialSolution, UnsupportedDimension, UnsupportedRegime, ValidationError
from twowave.functionals import PhysParams, action_S, constraint_Q, kinetic_parts, rescale
from twowave.groundstate import (FlowConfig, GroundState, certify, decay_fit, fit_decay_rate, load_ground_state,
                                 save_ground_state, solve_shooting, solve_variational)
from twowave.radial import make_grid


def test_variational_canonical(gs_var, params):
    assert gs_var.action_M0 > 0
    h = np.array(gs_var.history)
    assert np.all(np.diff(h) <= 0)
    assert gs_var.report.positive and gs_var.report.monotone
    assert gs_var.xi[0] == pytest.approx(33.98, rel=1e-3)
    assert gs_var.eta[0] == pytest.approx(45.71, rel=1e-3)


def test_certificate_residuals(gs_var):
    rep = gs_var.report
    assert abs(rep.q_residual) <= 1e-5
    assert abs(rep.pohozaev_residual) <= 1e-5
    assert abs(rep.scaling_identity_residual) <= 1e-5
    assert rep.ode_residual <= 1e-6
    assert not rep.degenerate


def test_shooting_matches_variational(gs_var, gs_shoot, params):
    dist = np.max(np.abs(gs_var.xi - gs_shoot.xi)) / np.max(np.abs(gs_shoot.xi))
    assert dist <= 1e-3
    assert gs_shoot.report.ode_residual <= 1e-6
    pair = gs_shoot.pair
    assert abs(constraint_Q(pair, params)) <= 1e-5 * sum(kinetic_parts(pair))
    p0, q0 = gs_shoot.origin_values
    assert p0 > 0 and q0 > 0


def test_rescaled_family_below_m0(gs_var, params):
    for lam in (0.8, 0.9, 1.1, 1.25):
        assert action_S(rescale(gs_var.pair, lam), params) < gs_var.action_M0


def test_decay_rates(gs_var, params):
    rx, re = decay_fit(gs_var)
    sharp_x = math.sqrt(2 * params.m1 * params.omega1)
    sharp_e = math.sqrt(2 * params.m2 * params.omega2)
    assert rx >= sharp_x / 2 and re >= sharp_e / 2
    assert abs(rx - sharp_x) <= 0.1 * sharp_x
    assert abs(re - sharp_e) <= 0.1 * sharp_e


def test_decay_fit_recovers_planted_rate():
    g = make_grid(2000, 20.0, 5.0)
    r = g.r[1:]
    f = np.exp(-1.7 * r) * r ** (-2.0)
    assert fit_decay_rate(r, f, 5.0, (4.0, 9.0)) == pytest.approx(1.7, abs=1e-6)
    with pytest.raises(ValidationError):
        fit_decay_rate(r, f, 5.0, (9.0, 4.0))


def test_certify_zero_is_degenerate(params, small_grid):
    z = np.zeros(small_grid.n_points)
    rep = certify(GroundState(z, z, params, small_grid, 0.0))
    assert rep.degenerate


def test_certify_detects_perturbation(gs_var, params):
    bent = gs_var.xi * (1 + 0.01 * np.exp(-gs_var.grid.r**2))
    rep = certify(GroundState(bent, gs_var.eta, params, gs_var.grid, 0.0))
    assert abs(rep.pohozaev_residual) > 1e-3


def test_shooting_uncoupled_is_trivial(small_grid):
    p = PhysParams(a1=0.0, a2=0.0)
    with pytest.raises(TrivialSolution):
        solve_shooting(p, small_grid, (1.0, 1.0))


@pytest.mark.parametrize("kw,exc", [({"dim": 4.0}, UnsupportedDimension), ({"dim": 6.0}, UnsupportedDimension),
                                    ({"omega2": 3.0}, UnsupportedRegime)])
def test_solvers_reject_regime(kw, exc):
    p = PhysParams(**kw)
    g = make_grid(200, 10.0, p.dim)
    with pytest.raises(exc):
        solve_variational(p, g)
    with pytest.raises(exc):
        solve_shooting(p, g, (30.0, 40.0))


def test_grid_dimension_mismatch(params):
    with pytest.raises(ValidationError):
        solve_variational(params, make_grid(200, 10.0, 4.5))


def test_flow_config_validation():
    with pytest.raises(ValidationError):
        FlowConfig(step0=-1.0)


def test_real_dimension(params):
    p = params.replace(dim=4.5)
    g = make_grid(800, 16.0, 4.5)
    gs = solve_variational(p, g)
    assert gs.report.max_residual() <= 1e-5 and gs.report.positive


def test_table_round_trip(gs_small, tmp_path):
    path = save_ground_state(gs_small, tmp_path / "gs.txt")
    back = load_ground_state(path)
    np.testing.assert_array_equal(back.xi, gs_small.xi)
    np.testing.assert_array_equal(back.eta, gs_small.eta)
    assert back.params == gs_small.params and back.grid == gs_small.grid
    assert back.action_M0 == gs_small.action_M0


def test_table_errors(tmp_path, gs_small):
    with pytest.raises(DataFileError):
        load_ground_state(tmp_path / "missing.txt")
    junk = tmp_path / "junk.txt"
    junk.write_text("1,2,3\nfoo\n")
    with pytest.raises(DataFileError):
        load_ground_state(junk)
    path = save_ground_state(gs_small, tmp_path / "gs.txt")
    lines = path.read_text().splitlines()
    (tmp_path / "cut.txt").write_text("\n".join(lines[:-5] + ["1.0 2.0"]) + "\n")
    with pytest.raises(DataFileError):
        load_ground_state(tmp_path / "cut.txt")
