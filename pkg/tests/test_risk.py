import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_risk.errors import InvalidParameter, InvalidSpec, InvalidSplit, OutOfDomain, SeriesDivergence
from platoon_risk.graph import graph_spectrum, make_complete, make_path, make_random_connected
from platoon_risk.risk import (
    SQRT2,
    EventSpec,
    RiskValue,
    alpha_terms,
    collision_risk,
    collision_risk_lower_bound,
    collision_thresholds,
    detachment_risk,
    detachment_thresholds,
    e_lower,
    erfinv,
    inevitability_constant,
    joint_risk_boxes,
    kappa,
    risk_vector,
    tradeoff_bound,
)
from platoon_risk.stability import theta
from platoon_risk.variance import MarginalDeviations, f_min, sigma_star, sigma_vector

Z, INF = RiskValue.zero(), RiskValue.infinite()


@pytest.mark.parametrize("eps", [1e-12, 1e-6, 0.001, 0.01, 0.05, 0.2, 0.49, 0.4999999])
def test_kappa_residual(eps):
    k = kappa(eps)
    assert k > 0
    assert abs(math.erf(k) - (1 - 2 * eps)) <= 1e-13
    assert math.erfc(k) == pytest.approx(2 * eps, rel=1e-12)


@pytest.mark.parametrize("y", [-0.999, -0.3, 1e-9, 0.4, 0.9, 0.99999])
def test_erfinv_roundtrip(y):
    assert math.erf(erfinv(y)) == pytest.approx(y, abs=1e-15)


@pytest.mark.parametrize("eps", [0.0, 0.5, 0.7, -0.1])
def test_kappa_domain(eps):
    with pytest.raises(OutOfDomain):
        kappa(eps)


def test_kappa_vanishes_at_half():
    assert kappa(0.5 - 1e-12) < 1e-11


def test_reference_thresholds():
    assert collision_thresholds(EventSpec.collision(1.0, 0.01))[1] == pytest.approx(0.4299, abs=1e-4)
    assert detachment_thresholds(EventSpec.detachment(1.0, 0.05, a=2, h=1))[1] == pytest.approx(0.6080, abs=1e-4)


def test_collision_examples():
    spec = EventSpec.collision(1.0, 0.01, c=1.0)
    crit = collision_thresholds(spec)[1]
    assert collision_risk(0.0, spec) == Z
    assert collision_risk(0.43, spec) == INF
    assert collision_risk(crit, spec) == INF
    r = collision_risk(crit / 2, spec)
    assert r.is_finite and r.value == pytest.approx(1.0, rel=1e-12)


def test_detachment_examples():
    spec = EventSpec.detachment(1.0, 0.05, a=2.0, h=1.0)
    crit = detachment_thresholds(spec)[1]
    r = detachment_risk(crit / 2, spec)
    assert r.value == pytest.approx(1.0, rel=1e-12)
    assert detachment_risk(crit, spec) == INF
    assert detachment_risk(0.0, EventSpec.detachment(1.0, 0.05, a=3.0, h=1.0)) == Z


def test_detachment_a_one_is_instant():
    spec = EventSpec.detachment(1.0, 0.05, a=1.0, h=1.0)
    assert detachment_risk(1e-12, spec) == INF


def test_eps_at_half_is_zero():
    assert collision_risk(100.0, EventSpec.collision(1.0, 0.5)) == Z
    assert detachment_risk(100.0, EventSpec.detachment(1.0, 0.7)) == Z


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="crash", d=1, eps=0.1),
        dict(kind="collision", d=0, eps=0.1),
        dict(kind="collision", d=1, eps=0.0),
        dict(kind="collision", d=1, eps=0.1, c=0.5),
        dict(kind="detachment", d=1, eps=0.1, a=0.5),
        dict(kind="detachment", d=1, eps=0.1, h=0),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        EventSpec(**kwargs)


def test_negative_sigma():
    with pytest.raises(InvalidParameter):
        collision_risk(-1e-3, EventSpec.collision(1.0, 0.1))


@pytest.mark.parametrize("c", [1.0, 1.5, 3.0])
def test_collision_branch_continuity(c):
    spec = EventSpec.collision(1.3, 0.02, c=c)
    zero_at, inf_at = collision_thresholds(spec)
    k = kappa(spec.eps)
    expr = lambda s: spec.d / (spec.d - k * s * SQRT2) - c  # noqa: E731
    assert expr(zero_at) == pytest.approx(0.0, abs=1e-12)
    if c > 1:
        assert collision_risk(zero_at - 1e-9, spec) == Z
        assert collision_risk(zero_at + 1e-9, spec).value == pytest.approx(0.0, abs=1e-7)
    assert collision_risk(inf_at - 1e-9, spec).value > 1e7
    assert collision_risk(inf_at + 1e-9, spec) == INF


@pytest.mark.parametrize("a, h", [(2.0, 1.0), (1.5, 4.0), (3.0, 0.8)])
def test_detachment_branch_continuity(a, h):
    spec = EventSpec.detachment(1.0, 0.03, a=a, h=h)
    zero_at, inf_at = detachment_thresholds(spec)
    k = kappa(spec.eps)
    expr = 1.0 / ((a - 1) * spec.d - SQRT2 * k * zero_at) - h
    assert expr == pytest.approx(0.0, abs=1e-12)
    if zero_at > 1e-9:
        assert detachment_risk(zero_at - 1e-9, spec) == Z
        assert detachment_risk(zero_at + 1e-9, spec).value == pytest.approx(0.0, abs=1e-6)
    assert detachment_risk(inf_at - 1e-9, spec).value > 1e7
    assert detachment_risk(inf_at + 1e-9, spec) == INF


@given(st.floats(1e-4, 0.49), st.floats(1e-4, 0.49), st.floats(0.0, 2.0), st.floats(1.0, 3.0))
@settings(max_examples=200, deadline=None)
def test_monotone_in_eps(e1, e2, sigma, c):
    lo, hi = sorted((e1, e2))
    a = collision_risk(sigma, EventSpec.collision(1.0, lo, c))
    b = collision_risk(sigma, EventSpec.collision(1.0, hi, c))
    assert a >= b
    if a.is_finite and b.is_finite and hi - lo > 1e-9:
        assert a.value > b.value


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(1e-3, 0.49), st.sampled_from(["collision", "detachment"]))
@settings(max_examples=200, deadline=None)
def test_monotone_in_sigma(s1, s2, eps, kind):
    spec = EventSpec(kind, 1.0, eps, c=1.4, a=2.0, h=1.2)
    lo, hi = sorted((s1, s2))
    f = collision_risk if kind == "collision" else detachment_risk
    assert f(lo, spec) <= f(hi, spec)


def test_risk_value_order_and_format():
    assert RiskValue.finite(0.0) == Z
    assert RiskValue.finite(math.inf) == INF
    assert Z < RiskValue.finite(1e-9) < RiskValue.finite(2.0) < INF
    assert Z.format() == "0" and INF.format() == "inf"
    assert RiskValue.finite(0.123456789).format(4) == "0.1235"


def test_risk_vectors_complete_and_path():
    spec = EventSpec.collision(1.0, 0.05, c=1.2)
    md = sigma_vector(graph_spectrum(make_complete(6, 1.111 / 0.6)), 1.0, 0.1, 2.2)
    assert len(set(risk_vector(md, spec))) == 1
    md = sigma_vector(graph_spectrum(make_path(21, 0.3)), 0.6, 0.5, 0.2)
    r = risk_vector(md, spec)
    assert len(r) == 20
    for i in range(20):
        assert r[i].kind == r[19 - i].kind
        if r[i].is_finite:
            assert r[i].value == pytest.approx(r[19 - i].value, rel=1e-9)


def test_infinite_entries_track_threshold():
    spec = EventSpec.collision(0.5, 0.01)
    crit = collision_thresholds(spec)[1]
    sig = np.array([0.5, 0.9, 0.999999, 1.0, 1.2]) * crit
    r = risk_vector(MarginalDeviations(sig, 1.0, 0.1, 1.0), spec)
    assert [x.is_infinite for x in r] == [False, False, False, True, True]


def test_joint_boxes():
    spec = EventSpec.collision(1.0, 0.1)
    md = MarginalDeviations(np.array([0.1, 0.2, 0.15]), 1.0, 0.1, 1.0)
    V, W = joint_risk_boxes(md, spec)
    for (vlo, vhi), (wlo, whi), s in zip(V, W, md.sigma):
        assert vlo == Z
        assert vhi == wlo == collision_risk(s, spec)
        assert whi >= wlo
        assert whi == collision_risk(s, spec.with_eps(spec.eps / 3))
    _, W1 = joint_risk_boxes(MarginalDeviations(np.array([0.2]), 1.0, 0.1, 1.0), spec)
    assert W1[0][0] == W1[0][1]
    _, Wc = joint_risk_boxes(md, spec, split=[0.05, 0.03, 0.02])
    assert Wc[0][1] == collision_risk(0.1, spec.with_eps(0.05))


@pytest.mark.parametrize("split", [[0.05, 0.05], [0.05, 0.05, 0.01], [0.11, -0.01, 0.0], [0.1, 0.0, 0.0]])
def test_joint_boxes_bad_split(split):
    md = MarginalDeviations(np.array([0.1, 0.2, 0.15]), 1.0, 0.1, 1.0)
    with pytest.raises(InvalidSplit):
        joint_risk_boxes(md, EventSpec.collision(1.0, 0.1), split)


def test_inevitability_constant():
    assert inevitability_constant() == pytest.approx(math.sqrt(2 * 25.4603 / math.pi), rel=3e-3)
    assert inevitability_constant() == pytest.approx(4.02, abs=0.01)


def test_lower_bound_branches():
    spec = EventSpec.collision(1.0, 0.01)
    assert collision_risk_lower_bound(1.0, 0.0, spec) == Z
    # |g| tau^{3/2} at the inevitability level makes every platoon infinite
    gt = spec.d / (inevitability_constant() * kappa(spec.eps))
    assert collision_risk_lower_bound(gt * 1.000001, 1.0, spec) == INF
    assert collision_risk_lower_bound(gt * 0.5, 1.0, spec).is_finite


@pytest.mark.parametrize("seed", range(8))
def test_lower_bound_below_every_pair(seed):
    g = make_random_connected(6, 0.5, seed=seed, weight_range=(0.5, 2.0))
    s = graph_spectrum(g)
    tau, bt = 0.15, 0.3
    G = g.scaled(0.7 * theta(bt) / (s.eigenvalues[-1] * tau))
    md = sigma_vector(graph_spectrum(G), 0.8, tau, bt / tau)
    spec = EventSpec.collision(1.0, 0.05, c=1.2)
    bound = collision_risk_lower_bound(0.8, tau, spec)
    assert all(r >= bound for r in risk_vector(md, spec))


def test_e_lower_reduces_for_c_one():
    spec = EventSpec.collision(2.0, 0.02, c=1.0)
    ss = sigma_star(0.7, 0.3)
    assert e_lower(0.7, 0.3, spec) == pytest.approx(2 * kappa(0.02) ** 2 * ss**2 / 4.0, rel=1e-12)


def test_e_lower_zero_below_optimum():
    # with c > 1 and a tiny floor the numerator can be driven to zero
    assert e_lower(1e-6, 0.1, EventSpec.collision(1.0, 0.05, c=2.0)) == pytest.approx(0.0, abs=1e-24)


def test_tradeoff_small_noise_limit():
    spec = EventSpec.collision(1.0, 0.05, c=1.0)
    n, g, tau, beta = 6, 1e-6, 0.2, 2.0
    assert sum(alpha_terms(n, g, tau, spec)) < 1e-5
    expected = math.sqrt(n * tau * e_lower(g, tau, spec) * 2 * (n - 1) / math.pi)
    assert tradeoff_bound(n, g, tau, beta, spec) == pytest.approx(expected, rel=1e-5)


def test_tradeoff_series_terms_decay():
    terms = alpha_terms(8, 0.5, 0.1, EventSpec.collision(1.0, 0.05))
    assert 1 < len(terms) < 200
    assert terms[-1] < 1e-12 * sum(terms)


def test_tradeoff_divergence_and_domain():
    spec = EventSpec.collision(1.0, 0.01)
    with pytest.raises(SeriesDivergence):
        tradeoff_bound(5, 50.0, 0.5, 1.0, spec)
    with pytest.raises(OutOfDomain):
        tradeoff_bound(5, 1.0, 0.5, 2.0, spec)
    with pytest.raises(OutOfDomain):
        tradeoff_bound(5, 1.0, 0.0, 2.0, spec)


def test_f_min_feeds_constants():
    assert sigma_star(1.0, 1.0) * SQRT2 == pytest.approx(inevitability_constant())
    assert f_min()[0] > 25
