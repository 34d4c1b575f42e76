import math

import numpy as np
import pytest
from scipy import stats

from heavytail.dependence import (
    INDEPENDENT,
    DependenceKernel,
    fgm_conditional_level,
    fgm_kernel,
    kernel_from_dict,
    kernel_mean,
    sample_pair,
    verify_assumption_A,
    verify_assumption_B,
)
from heavytail.dist_core import DomainError, Exponential, Pareto, PointMass, UniformPos
from heavytail.product_conv import ProductModel
from heavytail.rng import RngStream
from heavytail.tail_diagnostics import FAILS, HOLDS


def test_h_of_level():
    k = fgm_kernel(0.5)
    np.testing.assert_allclose(k.h_of_level([0.0, 0.5, 1.0]), [0.5, 1.0, 1.5])
    assert k.h_bound == 1.5
    assert INDEPENDENT.h(np.array([1.0, 2.0]))[0] == 1.0


@pytest.mark.parametrize("g", [UniformPos(0.0, 1.0), Exponential(1.0), Pareto(3.0, 1.0)])
@pytest.mark.parametrize("theta", [-1.0, 0.5, 1.0])
def test_kernel_has_unit_mean(g, theta):
    assert kernel_mean(fgm_kernel(theta, g)) == pytest.approx(1.0, abs=1e-12)


def test_conditional_tail_formula():
    # FGM copula: P[X > x | Y = y] = Fbar(x) (1 - theta F(x) (1 - 2 G(y)))
    f, g = Pareto(2.0, 1.0), UniformPos(0.0, 1.0)
    k = fgm_kernel(0.7, g)
    for x, y in [(2.0, 0.1), (5.0, 0.9), (1.5, 0.5)]:
        fx = 1 - x**-2
        want = x**-2 * (1 - 0.7 * fx * (1 - 2 * y))
        assert k.conditional_tail(f, x, y) == pytest.approx(want, rel=1e-13)


def test_conditional_level_inverts_conditional_cdf():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, 1000)  # theta (1 - 2v)
    q = rng.uniform(0, 1, 1000)
    s = fgm_conditional_level(a, q)
    # conditional survival of the grade: s (1 - a (1 - s)) = q
    np.testing.assert_allclose(s * (1 - a * (1 - s)), q, rtol=1e-12, atol=1e-15)


def test_sample_pair_spearman_rho():
    # FGM copulas have Spearman rho = theta / 3
    f, g = Exponential(1.0), UniformPos(0.0, 1.0)
    x, y = sample_pair(fgm_kernel(0.9, g), f, g, RngStream(11), 400_000)
    rho = stats.spearmanr(x, y).statistic
    assert rho == pytest.approx(0.3, abs=0.01)
    # marginals are untouched by the coupling
    assert stats.kstest(x, "expon").pvalue > 1e-3
    assert stats.kstest(y, "uniform").pvalue > 1e-3


def test_kernel_validation():
    with pytest.raises(DomainError):
        DependenceKernel("fgm", 1.5)
    with pytest.raises(DomainError):
        DependenceKernel("gauss", 0.1)
    with pytest.raises(DomainError):
        fgm_kernel(0.5, PointMass(1.0))
    with pytest.raises(DomainError):
        kernel_from_dict({"kind": "fgm", "theta": 0.5, "rho": 1})
    assert kernel_from_dict(None) is INDEPENDENT
    assert kernel_from_dict({"kind": "fgm", "theta": 0.25}).theta == 0.25


def test_assumption_B_deviation_vanishes():
    f, g = Pareto(2.0, 1.0), UniformPos(0.0, 1.0)
    xs = np.geomspace(10, 1e5, 30)
    c = verify_assumption_B(fgm_kernel(0.5, g), f, g, xs, np.linspace(0.01, 0.99, 50))
    # |P[X>x|y] / (h Fbar) - 1| is of order Fbar(x) = x^-2
    assert c.top_max < 1e-8
    assert c.slope == pytest.approx(-2.0, abs=0.05)


def test_assumption_A_light_weight_holds():
    f, g = Pareto(2.0, 1.0), UniformPos(0.0, 1.0)
    rep = verify_assumption_A(g, ProductModel(f, g))
    assert rep.verdict == HOLDS
    assert "finite right endpoint" in rep.note


def test_assumption_A_heavier_weight_fails():
    f, g = Pareto(3.0, 1.0), Pareto(1.5, 1.0)
    rep = verify_assumption_A(g, ProductModel(f, g))
    assert rep.verdict == FAILS


def test_assumption_A_exponential_weight_under_pareto():
    rep = verify_assumption_A(Exponential(1.0), ProductModel(Pareto(2.0, 1.0), Exponential(1.0)))
    assert rep.verdict == HOLDS
    assert math.isinf(Exponential(1.0).support_right)
