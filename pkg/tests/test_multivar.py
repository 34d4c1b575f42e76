import math

import numpy as np
import pytest

from heavytail import multivar as mv
from heavytail.dependence import fgm_kernel
from heavytail.dist_core import DomainError, Exponential, Pareto, StoppedSum, StoppingTime, UniformPos, Weibull
from heavytail.rng import RngStream
from heavytail.tail_diagnostics import FAILS, HOLDS, INCONCLUSIVE, Tolerances

INF = math.inf
P2 = Pareto(2.0, 1.0)


@pytest.fixture
def cf():
    return mv.common_factor(P2, (1.0, 1.0))


def test_joint_tail_examples(cf):
    assert mv.joint_tail(cf, (1, 1), 10.0).value == pytest.approx(0.01)
    ind = mv.IndependentComponents((P2, P2))
    assert mv.joint_tail(ind, (1, 1), 10.0).value == pytest.approx(1e-4)
    for model in (cf, ind, mv.FgmPair(P2, Exponential(1.0), 0.5)):
        assert model.joint_tail((1, INF), 7.0).value == pytest.approx(model.marginals[0].tail(7.0))


def test_common_factor_uses_binding_coordinate():
    m = mv.common_factor(P2, (1.0, 2.0))
    # Rbar(max(t1 x / 1, t2 x / 2))
    assert m.joint_tail((1.0, 3.0), 4.0).value == pytest.approx(P2.tail(6.0))


def test_joint_tail_bounded_by_marginals():
    models = [
        mv.common_factor(P2, (1.0, 0.5)),
        mv.IndependentComponents((P2, Weibull(0.5, 1.0))),
        mv.FgmPair(P2, Exponential(1.0), -0.7),
        mv.mrv_model(2.0, [[1.0, 0.5], [0.5, 1.0]], [0.5, 0.5]),
    ]
    xs = np.geomspace(1.0, 1e3, 13)
    for m in models:
        for t in [(1, 1), (0.5, 2.0), (3.0, 0.2)]:
            j = np.asarray(m.joint_tail(t, xs).value)
            for i in range(2):
                assert np.all(j <= np.asarray(m.marginals[i].tail(t[i] * xs)) * (1 + 1e-12))


def test_fgm_pair_formula():
    e = Exponential(1.0)
    m = mv.FgmPair(e, e, 0.8)
    a, b = 0.7, 1.3
    want = math.exp(-a - b) * (1 + 0.8 * (1 - math.exp(-a)) * (1 - math.exp(-b)))
    assert m.joint_tail((a, b), 1.0).value == pytest.approx(want, rel=1e-13)


def test_fgm_pair_sampler_matches_joint():
    e = Exponential(1.0)
    m = mv.FgmPair(e, e, 0.8)
    draws = m.sample(RngStream(3), 500_000)
    p = float(np.mean((draws[:, 0] > 0.7) & (draws[:, 1] > 1.3)))
    want = m.joint_tail((0.7, 1.3), 1.0).value
    assert abs(p - want) < 4 * math.sqrt(want * (1 - want) / 500_000)


def test_t_validation(cf):
    with pytest.raises(DomainError):
        cf.joint_tail((INF, INF), 1.0)
    with pytest.raises(DomainError):
        cf.joint_tail((0.0, 1.0), 1.0)
    with pytest.raises(DomainError):
        cf.joint_tail((1.0, 1.0, 1.0), 1.0)


def test_check_Dn_common_factor(cf):
    v = mv.check_Dn(cf)
    assert v.verdict == HOLDS
    ratio, _ = cf.joint_ratio((0.5, 0.5), (1, 1), cf.default_xs(), "r")
    np.testing.assert_allclose(ratio.values, 4.0, rtol=1e-12)


def test_check_Dn_independent_pareto():
    m = mv.IndependentComponents((P2, P2))
    assert mv.check_Dn(m).verdict == HOLDS
    ratio, _ = m.joint_ratio((0.5, 0.8), (1, 1), m.default_xs(), "r")
    # (b1 b2)^-2
    np.testing.assert_allclose(ratio.values, (0.5 * 0.8) ** -2, rtol=1e-12)


def test_check_Dn_weibull_factor_fails():
    assert mv.check_Dn(mv.common_factor(Weibull(0.5, 1.0), (1.0, 1.0))).verdict == FAILS


def test_check_PDn(cf):
    v = mv.check_PDn(cf)
    assert v.verdict == HOLDS
    ratio, _ = cf.joint_ratio((2.0, 2.0), (1, 1), cf.default_xs(), "r")
    np.testing.assert_allclose(ratio.values, 0.25, rtol=1e-12)
    e = Exponential(1.0)
    assert mv.check_PDn(mv.IndependentComponents((e, e))).verdict == HOLDS


def test_check_PDn_near_boundary_is_inconclusive(cf):
    v = mv.check_PDn(cf, v_grid=[(1.0001, 1.0001)])
    assert v.verdict == INCONCLUSIVE


def test_check_PDn_unequal_marginals_needs_strong_kernel():
    # Pareto(2) vs Pareto(3): no constant c with Fbar_2 ~ c Fbar_1
    m = mv.IndependentComponents((P2, Pareto(3.0, 1.0)))
    assert mv.check_PDn(m).verdict == FAILS


def test_b_and_v_validation(cf):
    with pytest.raises(DomainError):
        mv.check_Dn(cf, b_grid=[(0.5, 1.2)])
    with pytest.raises(DomainError):
        mv.check_PDn(cf, v_grid=[(0.9, 2.0)])


def test_scalar_product_radial_is_exact(cf):
    sp = mv.scalar_product(cf, UniformPos(0.0, 1.0))
    # P[R Y > 10] = 1 / (3 * 100)
    assert sp.joint_tail((1, 1), 10.0).value == pytest.approx(1 / 300, rel=1e-9)
    assert mv.check_Dn(sp).verdict == HOLDS


def test_scalar_product_independent_components():
    sp = mv.scalar_product(mv.IndependentComponents((P2, P2)), UniformPos(0.0, 1.0))
    # int_0^1 (y / x)^4 dy = 1 / (5 x^4) for x >= 1
    assert sp.joint_tail((1, 1), 10.0).value == pytest.approx(1 / 5e4, rel=1e-8)
    assert mv.check_Dn(sp).verdict == HOLDS


def test_scalar_product_sampled_matches_fgm_pair():
    base = mv.FgmPair(P2, P2, 0.5)
    base.mc_samples = 400_000
    sp = mv.scalar_product(base, UniformPos(0.5, 1.5))
    assert not sp.analytic
    est = sp.joint_tail((1, 1), 3.0)
    draws = mv.FgmPair(P2, P2, 0.5).sample(RngStream(77), 400_000) * UniformPos(0.5, 1.5).sample(RngStream(78), 400_000)[:, None]
    p = float(np.mean(np.min(draws, axis=1) > 3.0))
    assert abs(est.value - p) < 4 * math.hypot(est.stderr, math.sqrt(p * (1 - p) / 400_000))
    with pytest.raises(DomainError):
        mv.scalar_product(base, UniformPos(0.5, 1.5), fgm_kernel(0.5))


def test_vector_sum_sandwich_and_Dn(cf):
    vs = mv.vector_sum(cf, mv.common_factor(P2, (1.0, 1.0)))
    xs = vs.default_xs()
    for t in [(1, 1), (1, INF), (0.8, 1.0)]:
        est = vs.joint_tail(t, xs)
        lo, hi = vs.sandwich(t, xs)
        assert np.all(lo <= hi)
        assert np.all(est.value >= lo - 3 * est.stderr)
        assert np.all(est.value <= hi + 3 * est.stderr)
    assert mv.check_Dn(vs).verdict == HOLDS


def test_vector_sum_with_zero_is_passthrough(cf):
    vs = mv.vector_sum(cf, mv.zero_vector(2))
    assert vs.analytic
    assert vs.joint_tail((1, 1), 10.0).value == pytest.approx(0.01)


def test_stopped_vector_sum_projection():
    cf = mv.common_factor(P2, (1.0, 1.0))
    sv = mv.stopped_vector_sum(cf, StoppingTime.uniform([1, 2]))
    proj = mv.project(sv, 1)
    assert isinstance(proj, StoppedSum)
    xs = np.array([3.0, 10.0])
    est = sv.joint_tail((1.0, INF), xs)
    want = np.asarray(proj.tail(xs))
    assert np.all(np.abs(est.value - want) < 4 * np.sqrt(want * (1 - want) / sv.mc_samples))
    # S_N / X tail ratio tends to E[N] = 1.5
    assert proj.tail(1e4) / P2.tail(1e4) == pytest.approx(1.5, abs=0.01)


def test_stopped_vector_sum_drops_tiny_weights():
    cf = mv.common_factor(P2, (1.0, 1.0))
    cf.mc_samples = 10_000
    sv = mv.StoppedVectorSum(cf, StoppingTime(((1, 1 - 1e-13), (3, 1e-13))), 10_000)
    rows, w, m = sv._draws()
    assert rows.shape[0] == 10_000 and w.sum() == pytest.approx(1 - 1e-13)


def test_vector_mixture_analytic_formula():
    a, b = mv.common_factor(P2, (1.0, 1.0)), mv.common_factor(Pareto(3.0, 1.0), (1.0, 1.0))
    mix = mv.vector_mixture(a, b, 0.3)
    assert mix.joint_tail((1, 1), 10.0).value == pytest.approx(0.3 * 0.01 + 0.7 * 0.001)
    assert mv.check_Dn(mix).verdict == HOLDS


def test_projection_of_higher_dimension():
    m = mv.IndependentComponents((P2, Pareto(3.0, 1.0), Exponential(1.0)))
    pr = mv.project(m, 1)
    assert pr.dim == 2
    assert pr.joint_tail((1, 1), 2.0).value == pytest.approx(P2.tail(2.0) * math.exp(-2.0))
    with pytest.raises(DomainError):
        mv.project(m, 3)


def test_mrv_homogeneity_and_Dn():
    m = mv.mrv_model(2.0, [[2**-0.5, 2**-0.5]], [1.0])
    # Rbar(sqrt(2) x) = 1 / (2 x^2)
    assert m.joint_tail((1, 1), 10.0).value == pytest.approx(1 / 200)
    rep = mv.check_mrv_in_Dn(m)
    assert rep.confirmed is True
    assert rep.homogeneity.limit_estimate == pytest.approx(4.0, abs=1e-9)
    assert rep.bound == pytest.approx(4.0)


def test_mrv_axis_directions_not_applicable():
    m = mv.mrv_model(2.0, [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    rep = mv.check_mrv_in_Dn(m)
    assert rep.applicable is False and rep.confirmed == "not-applicable"
    assert m.joint_tail((1, 1), 5.0).value == 0.0


def test_linear_combination():
    m = mv.mrv_model(2.0, [[1.0, 0.5], [0.5, 1.0]], [0.5, 0.5])
    lc = mv.linear_combination(m, (1.0, 2.0))
    # l . D is 2 or 2.5 with equal weight
    assert lc.tail(10.0) == pytest.approx(0.5 * P2.tail(5.0) + 0.5 * P2.tail(4.0))
    assert mv.check_linear_combination(m).verdict == HOLDS
    ind = mv.linear_combination(mv.IndependentComponents((P2, P2)), (1.0, 2.0))
    draws = P2.sample(RngStream(1), 400_000) + 2 * P2.sample(RngStream(2), 400_000)
    p = float(np.mean(draws > 20.0))
    assert abs(ind.tail(20.0) - p) < 4 * math.sqrt(p * (1 - p) / 400_000)
    with pytest.raises(DomainError):
        mv.linear_combination(m, (-1.0, 1.0))


def test_kernel_equivalence_modes():
    same = mv.kernel_equivalence([P2, Pareto(2.0, 2.0)], P2, "strong")
    assert same.verdict == HOLDS
    assert same.constants[1] == pytest.approx(4.0)
    diff = mv.kernel_equivalence([P2, Pareto(3.0, 1.0)], P2, "weak")
    assert diff.verdict == FAILS


def test_closure_reports(cf):
    u = UniformPos(0.0, 1.0)
    rep = mv.verify_scalar_product_closure(cf, u, target="PDn")
    assert rep.theorem_confirmed is True
    mixed = mv.IndependentComponents((P2, Pareto(2.0, 2.0)))
    rep = mv.verify_scalar_product_closure(mixed, u, target="PDn")
    assert rep.theorem_confirmed == "not-applicable"
    rep = mv.verify_scalar_product_closure(mv.common_factor(Weibull(0.5, 1.0), (1, 1)), u)
    assert rep.theorem_confirmed == "not-applicable"
    rep = mv.verify_vector_mixture_closure(cf, mv.common_factor(Pareto(3.0, 1.0), (1, 1)), 0.3)
    assert rep.theorem_confirmed is True
    fgm = mv.FgmPair(P2, P2, 0.5)
    rep = mv.verify_vector_sum_closure(cf, fgm)
    assert rep.theorem_confirmed == "not-applicable"


def test_vector_json_round_trip():
    specs = [
        {"dim": 2, "joint": {"kind": "common_factor", "R": P2.to_dict(), "weights": [1.0, 2.0]}},
        {"dim": 2, "joint": {"kind": "independent"}, "marginals": [P2.to_dict(), Exponential(1.0).to_dict()]},
        {"dim": 2, "joint": {"kind": "fgm_pair", "theta": 0.3}, "marginals": [P2.to_dict(), P2.to_dict()]},
        {"dim": 2, "joint": {"kind": "mrv", "alpha": 2.0, "directions": [[1, 0.5]], "pmf": [1]}},
    ]
    for spec in specs:
        m = mv.vector_from_dict(spec)
        again = mv.vector_from_dict(m.to_dict())
        assert again.joint_tail((1, 1), 5.0).value == pytest.approx(m.joint_tail((1, 1), 5.0).value)


def test_vector_json_rejects_malformed():
    bad = [
        {"dim": 2, "joint": {"kind": "copula"}},
        {"dim": 3, "joint": {"kind": "common_factor", "R": P2.to_dict(), "weights": [1, 1]}},
        {"dim": 2, "joint": {"kind": "common_factor", "R": P2.to_dict()}},
        {"dim": 2, "joint": {"kind": "common_factor", "R": P2.to_dict(), "weights": [1, 1], "extra": 0}},
        {"dim": 2, "joint": {"kind": "fgm_pair", "theta": 0.3}, "marginals": [P2.to_dict()]},
        {"dim": 2, "foo": 1, "joint": {"kind": "independent"}},
    ]
    for spec in bad:
        with pytest.raises(DomainError):
            mv.vector_from_dict(spec)


def test_mc_hit_floor_gives_inconclusive():
    cf = mv.common_factor(P2, (1.0, 1.0))
    vs = mv.vector_sum(cf, mv.common_factor(P2, (1.0, 1.0)))
    vs.mc_samples = 200_000
    v = mv.check_Dn(vs, tol=Tolerances(min_hits=10_000))
    assert v.verdict == INCONCLUSIVE
