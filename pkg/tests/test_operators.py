import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppreg import (
    Ball,
    Disk,
    EllipticityParams,
    Interval,
    ScalarField,
    build_region,
)
from dppreg.exceptions import InvalidParams, NotAdmissible
from dppreg.operators import (
    DirectionSet,
    apply_operator,
    check_h1_sandwich,
    check_h2_translation,
    check_scaling_identity,
    fixed_direction,
    isaacs,
    operator_values,
    pucci_max,
    pucci_min,
    residual_field,
    second_difference,
    sup_over_set,
    tug_of_war_noise,
)

P1 = EllipticityParams(0.5, 0.5, 1.0, 0.2)
R1 = build_region(1, Interval(0, 1), 0.025, P1)
P2 = EllipticityParams(0.4, 0.6, 1.0, 0.1)
R2 = build_region(2, Disk((0, 0), 0.3), 0.05, P2)


def specs(params, dim):
    e = np.zeros(dim)
    e[0] = 0.7
    other = np.zeros(dim)
    other[-1] = -0.5
    return [
        pucci_max(params, dim),
        pucci_min(params, dim),
        fixed_direction(params, e),
        sup_over_set(params, [e, other]),
        isaacs(params, [[e, other], [other, -e, np.zeros(dim)]], "sup_inf"),
        isaacs(params, [[e, other], [other, -e, np.zeros(dim)]], "inf_sup"),
    ]


def random_field(region, rng, scale=1.0):
    return ScalarField(region, scale * rng.standard_normal(region.shape) * region.node_mask)


def test_direction_set_ball():
    d = DirectionSet.ball(2, 1.5)
    assert len(d) == 33
    assert np.all(np.linalg.norm(d.vectors, axis=1) <= 1.5 + 1e-12)
    assert d.covers_axes()
    assert DirectionSet.ball(1, 1.0).covers_axes()
    with pytest.raises(InvalidParams):
        DirectionSet([[2.0, 0.0]], 1.0)


def test_fixed_direction_norm_checked():
    with pytest.raises(InvalidParams):
        fixed_direction(P1, [1.5])


def test_isaacs_family_nonempty():
    with pytest.raises(InvalidParams):
        isaacs(P1, [])


def test_second_difference_examples():
    u = ScalarField.from_function(R1, lambda x: x[:, 0] ** 3)
    r = build_region(1, Interval(0, 2), 0.1, EllipticityParams(0.5, 0.5, 1.0, 0.2))
    u = ScalarField.from_function(r, lambda x: x[:, 0] ** 3)
    assert second_difference(u, [1.0], [0.1]) == pytest.approx(0.06, abs=1e-12)
    q = ScalarField.from_function(R2, lambda x: (x**2).sum(1))
    y = np.array([0.5, 0.0])
    assert second_difference(q, [0.0, 0.0], P2.epsilon * y) == pytest.approx(2 * P2.epsilon**2 * 0.25, abs=1e-15)
    a = ScalarField.from_function(R2, lambda x: 1 + 2 * x[:, 0] - x[:, 1])
    assert abs(second_difference(a, [0.05, 0.1], [0.03, -0.07])) <= 1e-14


@pytest.mark.parametrize("region,params", [(R1, P1), (R2, P2)])
def test_affine_gives_zero_for_every_variant(region, params):
    dim = region.dimension
    u = ScalarField.from_function(region, lambda x: 0.5 + x @ np.arange(1, dim + 1))
    for spec in specs(params, dim) + [tug_of_war_noise(params, dim)]:
        assert np.abs(operator_values(spec, u)).max() <= 1e-11


def _fine_second_moment(eps, n=1_000_000):
    y = -eps + (np.arange(n) + 0.5) * (2 * eps / n)
    return np.mean(y**2)


def test_pucci_max_on_quadratics_1d():
    eps = P1.epsilon
    ref = _fine_second_moment(eps) / eps**2  # oracle for 1/3
    h = R1.spacing
    up = ScalarField.from_function(R1, lambda x: x[:, 0] ** 2)
    dn = ScalarField.from_function(R1, lambda x: -x[:, 0] ** 2)
    spec = pucci_max(P1, 1)
    assert apply_operator(spec, up, [0.5]) == pytest.approx(P1.alpha + P1.beta * ref, abs=h)
    assert apply_operator(spec, dn, [0.5]) == pytest.approx(-P1.beta * ref, abs=h)


def test_residual_examples():
    c = ScalarField.from_function(R1, lambda x: np.full(len(x), 2.5))
    spec = pucci_max(P1, 1)
    assert residual_field(spec, c).sup_norm() == 0.0
    avg = fixed_direction(EllipticityParams(0.0, 1.0, 1.0, 0.2), [1.0])
    q = ScalarField.from_function(R1, lambda x: x[:, 0] ** 2)
    res = residual_field(avg, q, 1.0 / 3.0)
    assert res.sup_norm() <= R1.spacing
    assert res.sup_norm(R1.exterior_mask) == 0.0


@pytest.mark.parametrize("region,params", [(R1, P1), (R2, P2)])
def test_h1_sandwich_random_pairs(region, params, rng):
    for spec in specs(params, region.dimension):
        for _ in range(20):
            u, v = random_field(region, rng), random_field(region, rng)
            assert check_h1_sandwich(spec, u, v).max_violation <= 1e-12


def test_h1_affine_v_all_zero():
    spec = pucci_max(P2, 2)
    u = random_field(R2, np.random.default_rng(0))
    v = ScalarField.from_function(R2, lambda x: 3 * x[:, 0] - x[:, 1])
    rep = check_h1_sandwich(spec, u, v)
    assert rep.max_violation <= 1e-12
    assert abs(rep.lower_gap) <= 1e-12 and abs(rep.upper_gap) <= 1e-12


def test_h1_refuses_tug_of_war():
    u = ScalarField.zeros(R1)
    with pytest.raises(NotAdmissible):
        check_h1_sandwich(tug_of_war_noise(P1, 1), u, u)
    assert not tug_of_war_noise(P1, 1).admissible
    assert all(s.admissible for s in specs(P1, 1))


def test_h2_translation(rng):
    for spec in specs(P2, 2):
        u = random_field(R2, rng)
        assert check_h2_translation(spec, u, [0.0, 0.0]).max_difference == 0.0
        rep = check_h2_translation(spec, u, [R2.spacing, 0.0])
        assert rep.nodes_compared > 0 and rep.max_difference <= 1e-12
    u1 = ScalarField.from_function(R1, lambda x: np.sin(7 * x[:, 0]))
    for spec in specs(P1, 1):
        assert check_h2_translation(spec, u1, [2 * R1.spacing]).max_difference <= 1e-12


def test_scaling_identity():
    spec = pucci_max(P1, 1)
    aff = check_scaling_identity(spec, lambda x: 1 + 2 * x[:, 0], 2.0, Interval(0, 1), 0.025)
    assert aff.max_difference <= 1e-10
    quad = check_scaling_identity(spec, lambda x: x[:, 0] ** 2, 2.0, Interval(0, 1), 0.025)
    assert quad.max_difference <= 1e-10
    cube = check_scaling_identity(spec, lambda x: x[:, 0] ** 3, 2.0, Interval(0, 1), 0.025, samples=20)
    assert cube.samples == 20
    assert cube.max_difference <= 5 * cube.budget + 1e-10


# Algebraic properties over random fields and nodes

FIELD_SEED = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=FIELD_SEED)
def test_sign_duality_and_order(seed):
    rng = np.random.default_rng(seed)
    for region, params in [(R1, P1), (R2, P2)]:
        u = random_field(region, rng)
        plus = pucci_max(params, region.dimension)
        minus = pucci_min(params, region.dimension)
        lp_neg = operator_values(plus, -u)
        lm = operator_values(minus, u)
        assert np.array_equal(lp_neg, -lm)
        assert np.all(lm <= operator_values(plus, u))


@settings(max_examples=40, deadline=None)
@given(seed=FIELD_SEED, c=st.floats(0.0, 50.0))
def test_positive_homogeneity(seed, c):
    rng = np.random.default_rng(seed)
    u = random_field(R2, rng)
    spec = pucci_max(P2, 2)
    a = operator_values(spec, c * u)
    b = c * operator_values(spec, u)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(b).max())


@settings(max_examples=25, deadline=None)
@given(seed=FIELD_SEED, bump=st.floats(1e-6, 10.0))
def test_monotone_in_off_centre_reads(seed, bump):
    rng = np.random.default_rng(seed)
    for region, params in [(R1, P1), (R2, P2)]:
        u = random_field(region, rng)
        nodes = np.argwhere(region.interior_mask)
        centre = nodes[rng.integers(len(nodes))]
        nb = np.argwhere(region.node_mask)
        k = nb[rng.integers(len(nb))]
        if np.array_equal(k, centre):
            continue
        v = u.values.copy()
        v[tuple(k)] += bump
        w = ScalarField(region, v)
        mask = np.zeros(region.shape, bool)
        mask[tuple(centre)] = True
        for spec in specs(params, region.dimension) + [tug_of_war_noise(params, region.dimension)]:
            assert operator_values(spec, w, mask)[0] >= operator_values(spec, u, mask)[0] - 1e-12


def test_tug_of_war_on_quadratic_1d():
    # on [0.3, 0.7] sup + inf of x^2 is 0.49 + 0.09, so S = 0.08 = 2 eps^2
    u = ScalarField.from_function(R1, lambda x: x[:, 0] ** 2)
    val = apply_operator(tug_of_war_noise(P1, 1), u, [0.5])
    eps = P1.epsilon
    expected = (P1.alpha * 2 * eps**2 + P1.beta * 2 * _fine_second_moment(eps)) / (2 * eps**2)
    assert val == pytest.approx(expected, abs=R1.spacing)
