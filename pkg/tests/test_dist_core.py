import math

import numpy as np
import pytest
from scipy import stats

from heavytail.dist_core import (
    DomainError,
    Exponential,
    IndependentSum,
    Lognormal,
    Mixture,
    Pareto,
    PointMass,
    PositivePart,
    Shifted,
    SquaredTail,
    StoppedSum,
    StoppingTime,
    UniformPos,
    Weibull,
    convolve_tail,
    from_dict,
    integrated_tail,
    mixture,
    stopping_from_dict,
)
from heavytail.rng import RngStream

XS = np.array([0.5, 1.0, 2.0, 10.0, 100.0, 1e4])


@pytest.mark.parametrize(
    "model, oracle",
    [
        (Pareto(2.0, 1.0), stats.pareto(2.0)),
        (Pareto(1.5, 3.0), stats.pareto(1.5, scale=3.0)),
        (Weibull(0.5, 2.0), stats.weibull_min(0.5, scale=2.0)),
        (Lognormal(0.3, 1.2), stats.lognorm(1.2, scale=math.exp(0.3))),
        (Exponential(2.0), stats.expon(scale=0.5)),
        (UniformPos(0.3, 0.9), stats.uniform(0.3, 0.6)),
    ],
)
def test_tails_match_scipy(model, oracle):
    got = np.asarray(model.tail(XS))
    want = oracle.sf(XS)
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-300)
    lvl = np.array([0.5, 1e-3, 1e-9])
    np.testing.assert_allclose(model.isf(lvl), oracle.isf(lvl), rtol=1e-8)


def test_log_tail_far_beyond_underflow():
    # Exp(1): log tail is -x exactly, even where exp(-x) underflows
    e = Exponential(1.0)
    assert e.log_tail(5000.0) == pytest.approx(-5000.0, rel=1e-14)
    w = Weibull(0.5, 1.0)
    assert w.log_tail(1e8) == pytest.approx(-1e4, rel=1e-12)
    # Lognormal(0,1) at x = e^40: log Phi-bar(40)
    assert Lognormal(0.0, 1.0).log_tail(math.exp(40.0)) == pytest.approx(stats.norm.logsf(40.0), rel=1e-10)


def test_isf_log_inverts_deep_levels():
    p = Pareto(2.0, 1.0)
    # tail 1e-400 sits at x = 1e200
    assert p.isf_log(-400 * math.log(10)) == pytest.approx(1e200, rel=1e-10)
    w = Weibull(0.5, 1.0)
    assert w.isf_log(-1000.0) == pytest.approx(1e6, rel=1e-10)


def test_pareto_scale_and_shift_ratios():
    p = Pareto(2.0, 1.0)
    assert p.tail(50.0) / p.tail(100.0) == pytest.approx(4.0, rel=1e-14)
    assert p.tail(99.0) / p.tail(100.0) == pytest.approx((100 / 99) ** 2, rel=1e-14)


@pytest.mark.parametrize(
    "model, mean",
    [
        (Pareto(2.0, 1.0), 2.0),
        (Pareto(3.0, 2.0), 3.0),
        (Weibull(0.5, 1.0), 2.0),  # Gamma(3)
        (Lognormal(0.0, 1.0), math.exp(0.5)),
        (Exponential(4.0), 0.25),
        (UniformPos(0.3, 0.9), 0.6),
    ],
)
def test_means(model, mean):
    assert model.mean == pytest.approx(mean, rel=1e-10)


def test_pareto_heavy_mean_is_infinite():
    assert math.isinf(Pareto(1.0, 1.0).mean)


@pytest.mark.parametrize(
    "model, x, want",
    [
        # Pareto(2,1): int_x^inf t^-2 dt = 1/x
        (Pareto(2.0, 1.0), 10.0, 0.1),
        (Pareto(2.0, 1.0), 0.5, 0.5 + 1.0),
        (Exponential(2.0), 3.0, 0.5 * math.exp(-6.0)),
        # Weibull(0.5,1): int_x^inf e^{-sqrt t} dt = 2 (sqrt x + 1) e^{-sqrt x}
        (Weibull(0.5, 1.0), 16.0, 2 * 5 * math.exp(-4.0)),
    ],
)
def test_tail_integral_closed_forms(model, x, want):
    assert math.exp(model.log_tail_integral(x)) == pytest.approx(want, rel=1e-9)
    assert integrated_tail(model, x) == pytest.approx(want / model.mean, rel=1e-9)


def test_lognormal_integrated_tail_by_quadrature():
    from scipy import integrate

    ln = Lognormal(0.0, 1.0)
    want, _ = integrate.quad(lambda t: stats.lognorm(1.0).sf(t), 5.0, np.inf, epsabs=0, epsrel=1e-12)
    assert math.exp(ln.log_tail_integral(5.0)) == pytest.approx(want, rel=1e-8)


def test_exponential_self_convolution():
    e = Exponential(1.0)
    for x in (0.5, 5.0, 40.0):
        assert convolve_tail(e, e, x) == pytest.approx((1 + x) * math.exp(-x), rel=1e-8)


def test_pareto_convolution_matches_quadrature():
    from scipy import integrate

    p = Pareto(2.0, 1.0)
    x = 7.0
    # P[X1 + X2 > x] = Fbar(x - 1) + int_1^{x-1} Fbar(x - y) f(y) dy
    body, _ = integrate.quad(lambda y: min(1.0, (x - y) ** -2) * 2 * y**-3, 1.0, x - 1.0, epsrel=1e-12)
    want = p.tail(x - 1.0) + body
    assert convolve_tail(p, p, x) == pytest.approx(want, rel=1e-8)


def test_subexponential_convolution_ratio_tends_to_two():
    p = Pareto(2.0, 1.0)
    ratio = convolve_tail(p, p, 1e6) / p.tail(1e6)
    assert ratio == pytest.approx(2.0, rel=1e-3)


def test_mixture_and_decorators():
    a, b = Pareto(2.0, 1.0), Exponential(1.0)
    m = mixture(0.3, a, b)
    assert m.tail(3.0) == pytest.approx(0.3 * a.tail(3.0) + 0.7 * b.tail(3.0), rel=1e-14)
    s = Shifted(a, 2.0)
    assert s.tail(1.0) == pytest.approx(a.tail(3.0))
    assert s.support_left == -1.0
    assert not s.non_negative
    pp = PositivePart(s)
    assert pp.tail(-0.5) == 1.0 and pp.tail(4.0) == pytest.approx(a.tail(6.0))
    sq = SquaredTail(a)
    assert sq.tail(10.0) == pytest.approx(a.tail(10.0) ** 2)
    assert sq.isf(1e-4) == pytest.approx(10.0)


def test_point_mass():
    pm = PointMass(2.0)
    assert pm.tail(1.999) == 1.0 and pm.tail(2.0) == 0.0
    assert pm.mean == 2.0
    assert not pm.continuous


def test_stopped_sum_uniform_one_two():
    p = Pareto(2.0, 1.0)
    st = StoppedSum(p, StoppingTime.uniform([1, 2]))
    x = 30.0
    want = 0.5 * p.tail(x) + 0.5 * convolve_tail(p, p, x)
    assert st.tail(x) == pytest.approx(want, rel=1e-10)
    assert st.mean == pytest.approx(3.0)


def test_stopping_time_validation():
    with pytest.raises(DomainError):
        StoppingTime(((1, 0.5), (2, 0.4)))
    with pytest.raises(DomainError):
        StoppingTime(((0, 1.0),))
    assert StoppingTime(((0, 0.2), (3, 0.8))).kappa == 1
    assert StoppingTime(((2, 0.5), (5, 0.5))).kappa == 2
    with pytest.raises(DomainError):
        StoppingTime.poisson(15.0, n_max=20)
    pois = StoppingTime.poisson(1.0, n_max=20)
    assert pois.truncation_error < 1e-15


def test_samplers_agree_with_tails():
    s = RngStream(3)
    for model in (Pareto(2.0, 1.0), Weibull(0.5, 1.0), Lognormal(0.0, 1.0), mixture(0.5, Pareto(3.0, 1.0), Exponential(1.0))):
        draws = model.sample(s, 200_000)
        res = stats.kstest(draws, lambda x: np.asarray(model.cdf(x)))
        assert res.pvalue > 1e-3


def test_stopped_sum_sampler_matches_tail():
    st = StoppedSum(Exponential(1.0), StoppingTime(((0, 0.25), (1, 0.25), (3, 0.5))))
    draws = st.sample(RngStream(5), 400_000)
    for x in (0.5, 2.0, 5.0):
        p = float(np.mean(draws > x))
        se = math.sqrt(p * (1 - p) / draws.size)
        assert abs(p - st.tail(x)) < 4 * se


def test_independent_sum_requires_non_negative():
    with pytest.raises(DomainError):
        IndependentSum(Shifted(Pareto(2.0, 1.0), 2.0), Pareto(2.0, 1.0))


def test_parameter_validation():
    for bad in (lambda: Pareto(-1.0, 1.0), lambda: Weibull(0.0, 1.0), lambda: Lognormal(0.0, -1.0),
                lambda: Exponential(0.0), lambda: UniformPos(0.5, 0.2), lambda: UniformPos(-1.0, 1.0),
                lambda: Mixture(1.5, Pareto(2.0, 1.0), Pareto(3.0, 1.0))):
        with pytest.raises(DomainError):
            bad()
    with pytest.raises(DomainError):
        Pareto(2.0, 1.0).isf(0.0)
    with pytest.raises(DomainError):
        Pareto(2.0, 1.0).quantile(1.0)


def test_json_round_trip():
    specs = [
        {"family": "pareto", "alpha": 2.0, "xm": 1.0},
        {"family": "mixture", "p": 0.4, "left": {"family": "weibull", "tau": 0.5, "lambda": 1.0},
         "right": {"family": "lognormal", "mu": 0.0, "sigma": 1.0}},
        {"family": "shift", "base": {"family": "exponential", "rate": 1.0}, "c": 0.5},
        {"family": "stopped_sum", "base": {"family": "pareto", "alpha": 2.0, "xm": 1.0},
         "stopping": {"kind": "uniform", "values": [1, 2]}},
    ]
    for spec in specs:
        m = from_dict(spec)
        again = from_dict(m.to_dict())
        assert again.to_dict() == m.to_dict()
        assert again.tail(3.0) == m.tail(3.0)


def test_from_dict_rejects_malformed():
    with pytest.raises(DomainError):
        from_dict({"family": "pareto", "alpha": 2.0, "shape": 1})
    with pytest.raises(DomainError):
        from_dict({"family": "cauchy"})
    with pytest.raises(DomainError):
        from_dict({"alpha": 2.0})
    with pytest.raises(DomainError):
        from_dict({"family": "pareto"})
    with pytest.raises(DomainError):
        stopping_from_dict({"kind": "poisson", "lam": 1.0, "extra": 3})
