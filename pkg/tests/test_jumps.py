import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppreg import EllipticityParams, Interval, ScalarField, build_region
from dppreg.jumps import (
    calibrate_allowance,
    jump_proxy_field,
    predicted_jump_bound,
    reproduce_figures,
    solve_family_member,
    staircase_levels,
    verify_jump_bound,
)
from dppreg.solver import solve_coset_1d, step_data

EPS = 0.2
UNIT = Interval(0.0, 1.0)


def reference_bound(x, gnorm, alpha, eps):
    dist = min(x, 1.0 - x)
    k = math.ceil(dist / eps - 1e-9)
    return 2.0 * gnorm * alpha ** max(k, 0)


def test_bound_examples():
    assert predicted_jump_bound([0.3], 1.0, 0.5, 0.2, UNIT) == pytest.approx(0.5, abs=1e-15)
    assert predicted_jump_bound([0.37], 1.0, 0.0, 0.2, UNIT) == 0.0
    x = np.linspace(0.01, 0.99, 50)[:, None]
    np.testing.assert_array_equal(predicted_jump_bound(x, 3.0, 1.0, 0.2, UNIT), 6.0)
    # exact multiples use k, not k + 1
    assert predicted_jump_bound([0.4], 1.0, 0.5, 0.2, UNIT) == pytest.approx(0.5)


@settings(max_examples=300, deadline=None)
@given(
    x=st.floats(1e-6, 1 - 1e-6),
    gnorm=st.floats(0.0, 100.0),
    alpha=st.floats(0.0, 1.0),
    eps=st.sampled_from([0.05, 0.1, 0.2, 0.25, 1 / 3]),
)
def test_bound_matches_reference(x, gnorm, alpha, eps):
    got = predicted_jump_bound([x], gnorm, alpha, eps, UNIT)
    assert abs(got - reference_bound(x, gnorm, alpha, eps)) <= 1e-15 * max(1.0, gnorm)


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(0.0, 1.0), eps=st.sampled_from([0.05, 0.1, 0.2]))
def test_bound_decay_monotone(alpha, eps):
    x = np.linspace(1e-4, 0.5, 400)[:, None]
    b = predicted_jump_bound(x, 1.0, alpha, eps, UNIT)
    assert np.all(np.diff(b) <= 0)
    if alpha == 1.0:
        assert np.all(b == 2.0)


def test_proxy_examples():
    p = EllipticityParams(0.5, 0.5, 1.0, EPS)
    r = build_region(1, UNIT, EPS / 8, p)
    c = ScalarField.from_function(r, lambda x: np.full(len(x), 0.7))
    assert np.all(jump_proxy_field(c).proxy == 0)
    lin = ScalarField.from_function(r, lambda x: 2 * x[:, 0])
    np.testing.assert_allclose(jump_proxy_field(lin).proxy, 2 * r.spacing, atol=1e-13)
    prof = verify_jump_bound(c, 0.7, p, 0.0)
    assert prof.violations == 0
    np.testing.assert_allclose(prof.predicted_bound, 1.4 * 0.5 ** np.ceil(prof.dist_to_boundary / EPS - 1e-9))


def test_proxy_on_staircase():
    p = EllipticityParams.two_point(EPS)
    r = build_region(1, UNIT, EPS / 4, p)
    x = r.box_coords()[:, 0]
    stair = (np.floor(x / EPS + 1e-12) + 1) / 6
    v = np.where(r.interior_mask, stair, step_data(r.box_coords())) * r.node_mask
    jp = jump_proxy_field(ScalarField(r, v))
    # the pair (x_j, x_{j+1}) straddles a jump iff x_{j+1} is a multiple of eps
    right = jp.x + r.spacing
    at_jump = np.abs(right / EPS - np.round(right / EPS)) < 1e-9
    np.testing.assert_allclose(jp.proxy[at_jump], 1 / 6, atol=1e-15)
    assert np.all(jp.proxy[~at_jump] == 0)
    prof = verify_jump_bound(ScalarField(r, v), step_data, p, 0.0)
    assert prof.violations == 0 and np.all(prof.predicted_bound == 2.0)


def test_figure_curves():
    fig1, fig2, rep = reproduce_figures()
    assert rep.converged
    assert len(fig1.x) >= 512 and not fig1.approximate and fig2.approximate
    assert set(np.round(fig1.u * 6).astype(int)) == {1, 2, 3, 4, 5}
    np.testing.assert_allclose(np.unique(fig1.u), staircase_levels(EPS), atol=1e-12)
    np.testing.assert_allclose(fig1.u, (np.floor(fig1.x / EPS) + 1) / 6, atol=1e-12)
    assert np.all(np.diff(fig2.u) >= -1e-12)
    for c in (fig1, fig2):
        assert np.abs(c.u + c.u[::-1] - 1).max() <= 1e-6
    mid = solve_coset_1d("pure-two-point", EPS)(0.5)
    assert mid == pytest.approx(0.5)
    assert rep.solution.read([0.5]) == pytest.approx(0.5, abs=1e-6)


def test_fig2_zero_violations():
    allowance = calibrate_allowance(EPS, 64)
    assert 0 < allowance < 2 * EPS / 64
    spec, rep = solve_family_member(0.5, EPS, 64)
    prof = verify_jump_bound(rep.solution, step_data, spec.params, allowance)
    assert prof.violations == 0
    k = np.ceil(prof.dist_to_boundary / EPS - 1e-9)
    assert np.all(prof.jump_proxy <= 2 * 0.5**k + allowance)
