"""Products X * Y of a loss and a non-negative weight, and closure checks.

The product tail is integrated in the grade v = G(y) of the weight:

    P[XY > x] = int_0^1 P[X > x / Q_G(v) | G(Y) = v] dv,

split at v = 1/2 into a lower part in log v and an upper part in
log(1 - v), so that heavy or bounded weights are resolved to the same
relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import dist_core as dc
from .dependence import (
    INDEPENDENT,
    AssumptionReport,
    DependenceKernel,
    fgm_kernel,
    kernel_from_dict,
    kernel_mean,
    sample_pair,
    verify_assumption_A,
)
from .dist_core import LOG_FLOOR, DomainError, Mixture, TailModel
from .quadrature import log_integrate
from .rng import RngStream
from .tail_diagnostics import (
    FAILS,
    HOLDS,
    ClassVerdict,
    GridSpec,
    RatioCurve,
    Tolerances,
    check_class,
    is_falling,
    make_curve,
)

_PANELS = 24
_LOWER_LOG_V = math.log(1e-30)


def _geometric_log_edges(lo: np.ndarray, hi: float, panels: int) -> np.ndarray:
    """Edges in a log-probability coordinate from lo (< hi < 0), dense near hi."""
    a = -lo
    b = -hi
    e = -np.exp(np.log(a)[:, None] + (np.log(b) - np.log(a))[:, None] * np.linspace(0, 1, panels + 1)[None, :])
    e[:, 0] = lo
    e[:, -1] = hi
    return e


def _with_breakpoint(edges: np.ndarray, bp: np.ndarray) -> np.ndarray:
    lo, hi = edges[:, :1], edges[:, -1:]
    bp = np.clip(np.nan_to_num(bp[:, None], nan=-np.inf, neginf=-np.inf), lo, hi)
    return np.sort(np.concatenate([edges, bp], axis=1), axis=1)


def grade_integral(g: TailModel, log_phi, rows: int, x_hint=None, kink_y=None, rtol: float = 1e-9) -> np.ndarray:
    """log int_0^1 exp(log_phi(y, one_minus_2v, rows)) dv, y = Q_G(v), row by row.

    ``kink_y`` (per row) is a y at which the integrand has a kink; it becomes a
    panel edge. ``x_hint`` (per row) bounds how deep into the upper grade tail
    the integration must reach.
    """
    lower_hi = math.log(0.5)
    lo_edges = _geometric_log_edges(np.full(rows, _LOWER_LOG_V), lower_hi, _PANELS)
    if x_hint is not None:
        deep = np.asarray(x_hint)
    else:
        deep = np.full(rows, math.log(1e-30))
    deep = np.clip(np.minimum(deep, math.log(1e-30)), LOG_FLOOR, None)
    up_edges = _geometric_log_edges(deep, lower_hi, _PANELS)
    if kink_y is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            lo_edges = _with_breakpoint(lo_edges, np.log(np.asarray(g.cdf(kink_y))))
            up_edges = _with_breakpoint(up_edges, np.asarray(g.log_tail(kink_y)))

    def lower(lv, r):
        v = np.exp(lv)
        y = g.quantile(np.minimum(v, 0.5))
        return lv + log_phi(y, 1.0 - 2.0 * v, r)

    def upper(lw, r):
        y = g._isf_log(lw)
        return lw + log_phi(y, 2.0 * np.exp(lw) - 1.0, r)

    a, _ = log_integrate(lower, lo_edges, rtol=rtol)
    b, _ = log_integrate(upper, up_edges, rtol=rtol)
    return np.logaddexp(a, b)


@dataclass(frozen=True)
class ProductModel(TailModel):
    """Law of X * Y with X ~ f, Y ~ g >= 0 coupled by ``kernel``.

    ``mode="exact"`` integrates the true conditional tail; ``mode="weighted"``
    integrates h(y) Fbar(x / y), the tail-equivalent form.
    """

    f: TailModel
    g: TailModel
    kernel: DependenceKernel = INDEPENDENT
    mode: str = "exact"
    costly = True

    def __post_init__(self):
        if self.g.support_left < 0:
            raise DomainError("the weight Y must be non-negative")
        if float(self.g.cdf(0.0)) >= 1.0:
            raise DomainError("the weight Y has all its mass at 0")
        if self.mode not in ("exact", "weighted"):
            raise DomainError("mode must be 'exact' or 'weighted'")
        if not self.kernel.is_independent and not self.g.continuous:
            raise DomainError("FGM dependence needs a continuous weight law")

    @property
    def continuous(self):
        return self.f.continuous

    @property
    def support_left(self):
        sl = self.f.support_left
        return sl * (self.g.support_left if sl >= 0 else self.g.support_right)

    @property
    def support_right(self):
        sr = self.f.support_right
        if sr <= 0:
            return sr * self.g.support_left
        return sr * self.g.support_right if self.g.support_right > 0 else 0.0

    def _log_cond(self, z, one_minus_2v):
        lt = self.f.log_tail_fast(z)
        if self.kernel.is_independent:
            return lt
        if self.mode == "weighted":
            return np.log(1.0 - self.kernel.theta * one_minus_2v) + lt
        return self.kernel.log_conditional_tail(lt, one_minus_2v)

    @cached_property
    def _median_f(self) -> float:
        m = float(self.f.isf(0.5))
        return m if m > 0 else 1.0

    def _log_tail(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        flat = x.ravel()
        out = np.zeros(flat.shape)
        pos = flat >= 0
        if pos.any():
            out[pos] = self._log_tail_nonneg(flat[pos])
        neg = ~pos
        if neg.any() and self.f.support_left < 0:
            out[neg] = self._log_tail_negative(flat[neg])
        return out.reshape(shape)

    def _log_tail_nonneg(self, xs):
        if isinstance(self.g, dc.PointMass):
            return np.asarray(self.f.log_tail(xs / self.g.c)) if self.g.c > 0 else np.where(xs < 0, 0.0, -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            deep = np.asarray(self.g.log_tail(xs / self._median_f)) - 40.0
        sl = self.f.support_left
        kink = xs / sl if sl > 0 else None

        def log_phi(y, om2v, r):
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(y > 0, xs[r][:, None, None] / y, np.inf)
            return self._log_cond(z, om2v)

        return grade_integral(self.g, log_phi, xs.size, x_hint=deep, kink_y=kink)

    def _log_tail_negative(self, xs):
        # P[XY > x] = 1 - int P[X <= x / y | v] dv for x < 0
        def log_phi(y, om2v, r):
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(y > 0, xs[r][:, None, None] / y, -np.inf)
                lt = self.f.log_tail(z)
                cdf = -np.expm1(lt)
                if self.kernel.is_independent:
                    return np.log(cdf)
                h = 1.0 - self.kernel.theta * om2v if self.mode == "weighted" else 1.0 + self.kernel.theta * np.exp(lt) * om2v
                return np.log(cdf * h)

        below = grade_integral(self.g, log_phi, xs.size)
        return np.log1p(-np.minimum(np.exp(below), 1.0))

    # -- integrals -------------------------------------------------------
    def _log_tail_integral(self, x):
        """int_x^inf Hbar = int y [A(v) I_F(x/y) + B(v) I_{F^2}(x/y)] dv.

        A = 1 - theta (1 - 2v), B = theta (1 - 2v) for the exact FGM form,
        B = 0 and A = h for the weighted form; I_F is the tail integral of F
        and F^2 the law of the minimum of two independent copies.
        """
        if not self.f.non_negative:
            raise DomainError("tail integral of a product needs a non-negative loss")
        x = np.asarray(x, dtype=float)
        xs = x.ravel()
        sq = self.f.squared() if (not self.kernel.is_independent and self.mode == "exact") else None
        theta = self.kernel.theta

        def log_phi(y, om2v, r):
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(y > 0, xs[r][:, None, None] / y, np.inf)
                li = np.asarray(self.f.log_tail_integral(z))
                a = 1.0 - theta * om2v
                if sq is None:
                    return np.log(y) + np.log(a) + li
                li2 = np.asarray(sq.log_tail_integral(z))
                return np.log(y) + li + np.log(a + theta * om2v * np.exp(li2 - li))

        with np.errstate(divide="ignore", invalid="ignore"):
            deep = np.asarray(self.g.log_tail(np.maximum(xs, 1e-300) / self._median_f)) - 40.0
        sl = self.f.support_left
        kink = np.maximum(xs, 1e-300) / sl if sl > 0 else None
        return grade_integral(self.g, log_phi, xs.size, x_hint=deep, kink_y=kink).reshape(x.shape)

    @cached_property
    def mean(self) -> float:
        if not self.f.non_negative:
            raise DomainError("numeric mean requires a non-negative model")
        ef, eg = self.f.mean, moment(self.g, 1.0)
        if math.isinf(ef) or math.isinf(eg):
            return math.inf
        if self.kernel.is_independent:
            return ef * eg
        cov_y = grade_moment(self.g, 1.0, lambda v: 1.0 - 2.0 * v)  # E[Y (1 - 2G(Y))]
        theta = self.kernel.theta
        if self.mode == "weighted":
            return ef * (eg - theta * cov_y)
        e_min = self.f.squared().mean
        return ef * eg - theta * (ef - e_min) * cov_y

    def sample(self, stream, n):
        x, y = sample_pair(self.kernel, self.f, self.g, stream, n)
        return x * y

    def to_dict(self):
        d = {"family": "product", "f": self.f.to_dict(), "g": self.g.to_dict(), "dependence": self.kernel.to_dict()}
        if self.mode != "exact":
            d["mode"] = self.mode
        return d


dc.register_family(
    "product",
    {"f", "g", "dependence", "mode"},
    lambda s: ProductModel(
        dc.from_dict(s["f"]), dc.from_dict(s["g"]), kernel_from_dict(s.get("dependence")), s.get("mode", "exact")
    ),
)


@dataclass(frozen=True)
class TiltedModel(TailModel):
    """The weight law re-weighted by h: cdf v (1 - theta + theta v) at v = G(y)."""

    g: TailModel
    theta: float

    @property
    def support_left(self):
        return self.g.support_left

    @property
    def support_right(self):
        return self.g.support_right

    def _log_tail(self, y):
        # 1 - v (1 - theta + theta v) = (1 - v)(1 + theta v)
        return np.asarray(self.g.log_tail(y)) + np.log1p(self.theta * np.asarray(self.g.cdf(y)))

    def _isf(self, w):
        s = 2.0 * w / ((1.0 + self.theta) + np.sqrt((1.0 + self.theta) ** 2 - 4.0 * self.theta * w))
        return self.g._isf(s)

    def _isf_log(self, log_w):
        return self._isf(np.exp(log_w))

    def to_dict(self):
        return {"family": "tilted", "g": self.g.to_dict(), "theta": self.theta}


def tilted(kernel: DependenceKernel, g: TailModel) -> TailModel:
    return g if kernel.is_independent else TiltedModel(g, kernel.theta)


# ---------------------------------------------------------------------------
# moments


def grade_moment(g: TailModel, power: float, weight=None) -> float:
    """int_0^1 Q_G(v)^power * weight(v) dv (weight defaults to one).

    Signed weights are split into positive and negative parts so every
    integrand stays in log space.
    """

    def part(sign):
        def log_phi(y, om2v, r):
            with np.errstate(divide="ignore"):
                base = power * np.log(y)
                if weight is None:
                    return base
                return base + np.log(np.maximum(sign * weight((1.0 - om2v) / 2.0), 0.0))

        return float(np.exp(grade_integral(g, log_phi, 1)[0]))

    if weight is None:
        return part(1.0)
    return part(1.0) - part(-1.0)


def moment(g: TailModel, power: float) -> float:
    """E[Y^power] for Y >= 0; inf when the moment diverges."""
    if g.support_left < 0:
        raise DomainError("moments are taken of non-negative weights")
    if isinstance(g, dc.UniformPos):
        return g.moment(power)
    if isinstance(g, dc.PointMass):
        return g.c**power
    if isinstance(g, dc.Pareto):
        return math.inf if power >= g.alpha else g.alpha * g.xm**power / (g.alpha - power)
    if isinstance(g, Mixture):
        return g.p * moment(g.left, power) + (1 - g.p) * moment(g.right, power)
    if isinstance(g, dc.Exponential):
        return math.gamma(power + 1) / g.rate**power
    if isinstance(g, dc.Weibull):
        return g.lam**power * math.gamma(1 + power / g.tau)
    if isinstance(g, dc.Lognormal):
        return math.exp(power * g.mu + 0.5 * (power * g.sigma) ** 2)
    if math.isinf(g.support_right):
        from .tail_diagnostics import matuszewska

        est = matuszewska(g)
        if est.beta_hat <= power:
            return math.inf
    return grade_moment(g, power)


def weighted_moment(g: TailModel, kernel: DependenceKernel, power: float) -> float:
    """int h(y) y^power G(dy); the tail constant of the product with a Pareto(power) loss."""
    base = moment(g, power)
    if kernel.is_independent or math.isinf(base):
        return base
    return base - kernel.theta * grade_moment(g, power, lambda v: 1.0 - 2.0 * v)


# ---------------------------------------------------------------------------
# integrals and Monte Carlo


def product_tail_integral(f: TailModel, g: TailModel, kernel: DependenceKernel, x, mode: str = "weighted"):
    """int h(y) Fbar(x / y) G(dy) (``mode="weighted"``) or the exact conditional integral."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError("product tail integral is defined for x > 0")
    return ProductModel(f, g, kernel, mode).tail(x)


def product_tail_mc(
    f: TailModel, g: TailModel, kernel: DependenceKernel, x, n: int, stream: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of n dependent pairs with X * Y > x, and its binomial stderr."""
    if n < 10_000:
        raise DomainError("product_tail_mc needs n >= 1e4")
    xs, scalar = dc._as_array(x)
    hits = np.zeros(xs.size, dtype=np.int64)
    done = 0
    chunk = 1_000_000
    grid = np.sort(xs.ravel())
    order = np.argsort(xs.ravel())
    while done < n:
        m = min(chunk, n - done)
        a, b = sample_pair(kernel, f, g, stream, m)
        prod = np.sort(a * b)
        counts = m - np.searchsorted(prod, grid, side="right")
        hits[order] += counts
        done += m
    p = hits / n
    se = np.sqrt(p * (1 - p) / n)
    if scalar:
        return float(p[0]), float(se[0])
    return p.reshape(xs.shape), se.reshape(xs.shape)


def breiman_ratio(
    f: TailModel, g: TailModel, kernel: DependenceKernel = INDEPENDENT, x_grid=None, mode: str = "exact"
) -> tuple[RatioCurve, float, bool]:
    """Curve Hbar(x) / Fbar(x), the tail constant it should approach, and a moment flag.

    The flag is True when E[Y^(alpha + 0.1)] is finite, the condition under
    which the limit is guaranteed.
    """
    if not isinstance(f, dc.Pareto):
        raise DomainError("the reference ratio needs a Pareto loss")
    h = ProductModel(f, g, kernel, mode)
    xs = GridSpec().xs(h) if x_grid is None else np.asarray(x_grid, dtype=float)
    curve = make_curve("product_over_loss_tail", xs, np.asarray(h.log_tail(xs)) - np.asarray(f.log_tail(xs)))
    moment_ok = math.isfinite(moment(g, f.alpha + 0.1))
    return curve, weighted_moment(g, kernel, f.alpha), moment_ok


# ---------------------------------------------------------------------------
# closure checks


@dataclass
class ClosureReport:
    theorem: str
    preconditions: dict
    conclusion: ClassVerdict | None
    theorem_confirmed: bool | str  # True, False or "not-applicable"
    flags: list[str] = field(default_factory=list)

    @property
    def preconditions_pass(self) -> bool:
        return all(v.get("pass", False) for v in self.preconditions.values())

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "preconditions": self.preconditions,
            "conclusion": self.conclusion.to_dict() if self.conclusion else None,
            "theorem_confirmed": self.theorem_confirmed,
            "flags": self.flags,
        }


def _finish(theorem, pre, target, class_id, grid, tol) -> ClosureReport:
    if not all(v["pass"] for v in pre.values()):
        return ClosureReport(theorem, pre, None, "not-applicable")
    conclusion = check_class(target, class_id, grid, tol)
    flags = []
    if conclusion.verdict == FAILS:
        # finite-x diagnostics can misread slow corrections; never read as a disproof
        flags.append("inconclusive_vs_theory")
    return ClosureReport(theorem, pre, conclusion, conclusion.verdict == HOLDS, flags)


PRODUCT_CLASSES = ("Mstar", "M", "PD", "OS", "OL", "D", "C", "K", "DA", "T", "DL")


def verify_product_closure(
    f: TailModel,
    g: TailModel,
    kernel: DependenceKernel,
    class_id: str,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> ClosureReport:
    if class_id not in PRODUCT_CLASSES:
        raise DomainError(f"no product closure result for class {class_id!r}")
    grid = grid or GridSpec()
    tol = tol or Tolerances()
    pre: dict[str, dict] = {}
    fv = check_class(f, class_id, grid, tol)
    pre["loss_in_class"] = {"pass": fv.holds, "verdict": fv.verdict}
    g_ok = g.support_left >= 0 and float(g.cdf(0.0)) < 1.0
    pre["weight_non_negative"] = {"pass": g_ok}
    if not g_ok:
        return ClosureReport(f"product:{class_id}", pre, None, "not-applicable")
    if not kernel.is_independent and not g.continuous:
        pre["kernel_valid"] = {"pass": False, "detail": "FGM needs a continuous weight law"}
        return ClosureReport(f"product:{class_id}", pre, None, "not-applicable")
    e_h = kernel_mean(kernel, g)
    pre["assumption_B"] = {
        "pass": abs(e_h - 1.0) < 1e-6 and kernel.h_bound < math.inf,
        "E_h": e_h,
        "h_bound": kernel.h_bound,
    }
    if class_id in ("Mstar", "M"):
        ey = moment(g, 1.0)
        pre["finite_weight_mean"] = {"pass": 0 < ey < math.inf, "E_Y": ey}
        pre["finite_loss_mean"] = {"pass": f.non_negative and 0 < f.mean < math.inf, "E_X": f.mean if f.non_negative else None}
    if class_id == "OL":
        pre["loss_non_negative"] = {"pass": f.non_negative}
    if not all(v["pass"] for v in pre.values()):
        return ClosureReport(f"product:{class_id}", pre, None, "not-applicable")
    h = ProductModel(f, g, kernel)
    a_rep = verify_assumption_A(g, h, tol=tol)
    pre["assumption_A"] = {"pass": a_rep.holds, "verdict": a_rep.verdict, "note": a_rep.note}
    return _finish(f"product:{class_id}", pre, h, class_id, grid, tol)


def verify_mixture_closure(
    f1: TailModel,
    f2: TailModel,
    p: float,
    class_id: str,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> ClosureReport:
    if class_id not in ("PD", "T"):
        raise DomainError("mixture closure is checked for PD and T only")
    grid = grid or GridSpec()
    tol = tol or Tolerances()
    pre: dict[str, dict] = {}
    v1 = check_class(f1, class_id, grid, tol)
    v2 = check_class(f2, class_id, grid, tol)
    both = v1.holds and v2.holds
    branch = "both_in_class"
    if class_id == "T" and not both:
        pd2 = check_class(f2, "PD", grid, tol)
        xs = grid.xs(f1)
        with np.errstate(invalid="ignore"):
            ratio = make_curve("second_over_first", xs, np.asarray(f2.log_tail(xs)) - np.asarray(f1.log_tail(xs)))
        negligible = bool(np.all(np.isneginf(ratio.log_values[ratio.top]))) or (
            ratio.top_max < tol.m_threshold and is_falling(ratio, tol)
        )
        ok = v1.holds and pd2.holds and negligible
        branch = "dominant_first"
        pre["first_in_T"] = {"pass": v1.holds, "verdict": v1.verdict}
        pre["second_in_PD"] = {"pass": pd2.holds, "verdict": pd2.verdict}
        pre["second_negligible"] = {"pass": negligible, "top_max": ratio.top_max, "slope": ratio.slope}
        if not ok:
            pre["branch"] = {"pass": False, "detail": "neither hypothesis set holds"}
    else:
        pre["first_in_class"] = {"pass": v1.holds, "verdict": v1.verdict}
        pre["second_in_class"] = {"pass": v2.holds, "verdict": v2.verdict}
    report = _finish(f"mixture:{class_id}", pre, Mixture(p, f1, f2), class_id, grid, tol)
    report.flags.append(f"branch={branch}")
    return report
