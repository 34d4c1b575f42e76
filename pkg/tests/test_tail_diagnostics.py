import json
import math

import numpy as np
import pytest

from heavytail.dist_core import (
    DomainError,
    Exponential,
    Lognormal,
    Pareto,
    Shifted,
    UniformPos,
    Weibull,
    mixture,
)
from heavytail.tail_diagnostics import (
    CLASS_IDS,
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    GridSpec,
    Tolerances,
    check_class,
    classify,
    combine,
    curves_csv,
    integrated,
    log_ratio,
    make_curve,
    matuszewska,
    mgf_status,
    ratio_curve,
    scale,
    self_convolve,
    shift,
    verdict_json,
)


def test_pareto_scale_curve_is_constant_four():
    c = ratio_curve(Pareto(2.0, 1.0), scale(0.5))
    np.testing.assert_allclose(c.values, 4.0, rtol=1e-12)
    assert c.slope == pytest.approx(0.0, abs=1e-10)
    assert c.limit_estimate == pytest.approx(4.0)
    assert np.all(c.stderr == 0)


def test_pareto_shift_ratio_value():
    grid = GridSpec(start_x=100.0)
    c = ratio_curve(Pareto(2.0, 1.0), shift(1.0), grid)
    assert c.xs[0] == 100.0
    assert c.values[0] == pytest.approx((100 / 99) ** 2, rel=1e-12)


def test_exponential_scale_ratio_diverges():
    assert log_ratio(Exponential(1.0), scale(0.5), np.array([50.0]))[0] == pytest.approx(25.0, rel=1e-12)
    c = ratio_curve(Exponential(1.0), scale(0.5), GridSpec(start_x=1.0))
    assert c.slope > 0.5


def test_grid_preconditions():
    with pytest.raises(DomainError):
        GridSpec(n_points=10)
    with pytest.raises(DomainError):
        GridSpec(decades=2.0)
    xs = GridSpec().xs(Pareto(2.0, 1.0))
    # starts at the 1 - 1e-3 quantile and spans four decades
    assert xs[0] == pytest.approx(math.sqrt(1000.0))
    assert xs[-1] / xs[0] == pytest.approx(1e4)
    assert np.all(np.diff(xs) > 0)


def test_integrated_transform_needs_finite_mean():
    with pytest.raises(DomainError):
        ratio_curve(Pareto(1.0, 1.0), integrated(True))


def test_make_curve_summaries():
    xs = np.geomspace(1.0, 1e4, 41)
    c = make_curve("power", xs, 0.5 * np.log(xs))
    assert c.slope == pytest.approx(0.5)
    assert c.top_max == pytest.approx(100.0)
    assert c.top_min == pytest.approx(math.sqrt(1000.0))


def test_make_curve_infinite_values():
    xs = np.geomspace(1.0, 1e4, 41)
    lv = np.zeros_like(xs)
    lv[-1] = -np.inf
    c = make_curve("zero_tail", xs, lv)
    assert c.slope == -math.inf
    lv[-1] = np.inf
    assert make_curve("blow_up", xs, lv).slope == math.inf


def test_combine_rule():
    assert combine([HOLDS, HOLDS]) == HOLDS
    assert combine([HOLDS, FAILS, INCONCLUSIVE]) == FAILS
    assert combine([HOLDS, INCONCLUSIVE]) == INCONCLUSIVE


@pytest.mark.parametrize(
    "model, expected",
    [
        (Pareto(2.0, 1.0), {"D": HOLDS, "C": HOLDS, "L": HOLDS, "PD": HOLDS, "Mstar": HOLDS, "K": HOLDS, "S": HOLDS}),
        (Exponential(1.0), {"D": FAILS, "PD": HOLDS, "K": FAILS, "L": FAILS}),
        (Weibull(0.5, 1.0), {"L": HOLDS, "PD": HOLDS, "D": FAILS, "K": HOLDS, "S": HOLDS}),
        (Lognormal(0.0, 1.0), {"L": HOLDS, "PD": HOLDS, "D": FAILS, "K": HOLDS}),
    ],
)
def test_family_verdicts(model, expected):
    got = classify(model, tuple(expected))
    assert {k: v.verdict for k, v in got.items()} == expected


def test_pareto_mean_based_classes():
    got = classify(Pareto(2.0, 1.0), ("M", "Mstar"))
    assert got["M"].holds and got["Mstar"].holds
    # x Fbar / int Fbar tends to alpha - 1 = 1
    assert got["Mstar"].evidence[0].limit_estimate == pytest.approx(1.0, rel=1e-6)


def test_exponential_not_in_M():
    # Fbar(x) / int_x Fbar = rate exactly, so the ratio never vanishes
    assert check_class(Exponential(1.0), "M").verdict == FAILS


def test_composite_classes_follow_constituents():
    v = check_class(Pareto(2.0, 1.0), "T")
    assert v.verdict == HOLDS and v.parameters == {"L": HOLDS, "PD": HOLDS}
    v = check_class(Exponential(1.0), "A")
    assert v.verdict == FAILS
    assert v.parameters["PD"] == HOLDS


def test_bounded_support_verdicts():
    u = UniformPos(0.0, 1.0)
    assert check_class(u, "D").verdict == FAILS
    assert check_class(u, "K").verdict == FAILS
    assert check_class(u, "PD").verdict == INCONCLUSIVE


def test_shifted_pareto_stays_subexponential():
    # negative values are truncated before the convolution test
    v = check_class(Shifted(Pareto(2.0, 1.0), 3.0), "S")
    assert v.verdict == HOLDS


def test_mixture_dominated_by_heavier_branch():
    m = mixture(0.5, Pareto(2.0, 1.0), Exponential(1.0))
    assert check_class(m, "D").holds
    assert check_class(m, "L").holds


def test_mgf_status():
    assert mgf_status(Exponential(1.0), 0.5) == "converges"
    assert mgf_status(Exponential(1.0), 2.0) == "diverges"
    assert mgf_status(Weibull(0.5, 1.0), 0.001) == "diverges"
    assert mgf_status(Lognormal(0.0, 1.0), 0.001) == "diverges"


def test_unknown_class():
    with pytest.raises(DomainError):
        check_class(Pareto(2.0, 1.0), "Z")


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_matuszewska_pareto(alpha):
    est = matuszewska(Pareto(alpha, 1.0))
    assert est.beta_hat == pytest.approx(alpha, abs=1e-6)
    assert est.alpha_hat == pytest.approx(alpha, abs=1e-6)
    assert not est.beta_infinite


def test_matuszewska_weibull_sentinel():
    est = matuszewska(Weibull(0.5, 1.0))
    assert est.beta_infinite and math.isinf(est.beta_hat)
    assert est.to_dict()["beta_hat"] == "inf"


def test_matuszewska_lognormal_is_infinite():
    est = matuszewska(Lognormal(0.0, 1.0))
    assert est.beta_hat <= est.alpha_hat


def test_matuszewska_preconditions():
    with pytest.raises(DomainError):
        matuszewska(Pareto(2.0, 1.0), v_grid=(1.5, 2.0))
    with pytest.raises(DomainError):
        matuszewska(Pareto(2.0, 1.0), v_grid=(0.5, 2.0, 3.0, 4.0, 5.0))
    with pytest.raises(DomainError):
        matuszewska(UniformPos(0.0, 1.0))


def test_matuszewska_truncation():
    est = matuszewska(Pareto(2.0, 1.0), truncation_x=1e6)
    assert est.truncation_x == pytest.approx(1e6)


def test_tolerance_overrides():
    tol = Tolerances.from_dict({"pd_v": 3.0, "c_bs": [0.99, 0.9]})
    assert tol.pd_v == 3.0 and tol.c_bs == (0.99, 0.9)
    with pytest.raises(DomainError):
        Tolerances.from_dict({"nonsense": 1})


def test_exports_are_json_and_csv():
    v = check_class(Pareto(2.0, 1.0), "D")
    d = json.loads(verdict_json(v))
    assert d["class"] == "D" and d["verdict"] == HOLDS
    assert d["limit_estimate"] == pytest.approx(4.0)
    text = curves_csv(v.evidence)
    lines = text.strip().splitlines()
    assert lines[0] == "curve_id,x,value,stderr"
    assert len(lines) == 1 + 41


def test_class_ids_cover_composites():
    assert set(CLASS_IDS) >= {"D", "C", "L", "S", "OS", "OL", "PD", "M", "Mstar", "K", "A", "OA", "T", "DL", "DA"}


def test_self_convolution_transform_for_pareto():
    c = ratio_curve(Pareto(2.0, 1.0), self_convolve())
    assert c.limit_estimate == pytest.approx(2.0, rel=0.01)
