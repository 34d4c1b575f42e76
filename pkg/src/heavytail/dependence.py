"""Weak dependence between a loss X and a weight Y.

Two kernels ship: independence and the Farlie-Gumbel-Morgenstern copula
C(u, v) = uv(1 + theta (1 - u)(1 - v)). Differentiating C in v gives the
conditional law of X given G(Y) = v,

    P[X <= x | G(Y) = v] = F(x) (1 + theta (1 - F(x)) (1 - 2v)),
    P[X > x | G(Y) = v]  = Fbar(x) (1 - theta F(x) (1 - 2v)),

so the tail-equivalence weight is h(y) = 1 + theta (2 G(y) - 1), and the
deviation from it is exactly theta Fbar(x) |1 - 2G(y)| / h(y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dist_core import DomainError, TailModel
from .quadrature import log_integrate
from .rng import RngStream
from .tail_diagnostics import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    GridSpec,
    RatioCurve,
    Tolerances,
    is_falling,
    is_flat,
    make_curve,
)


@dataclass(frozen=True)
class DependenceKernel:
    kind: str = "independent"  # independent | fgm
    theta: float = 0.0
    g: TailModel | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("independent", "fgm"):
            raise DomainError(f"unknown dependence kind {self.kind!r}")
        if not -1.0 <= self.theta <= 1.0:
            raise DomainError("FGM theta must lie in [-1, 1]")
        if self.kind == "independent" and self.theta != 0.0:
            raise DomainError("independent kernel takes no theta")

    @property
    def is_independent(self) -> bool:
        return self.kind == "independent" or self.theta == 0.0

    @property
    def h_bound(self) -> float:
        return 1.0 + abs(self.theta)

    def h_of_level(self, v):
        """h as a function of the grade v = G(y)."""
        return 1.0 + self.theta * (2.0 * np.asarray(v, dtype=float) - 1.0)

    def h(self, y, g: TailModel | None = None):
        g = g or self.g
        if self.is_independent:
            return np.ones_like(np.asarray(y, dtype=float))
        if g is None:
            raise DomainError("h(y) needs the weight distribution G")
        return self.h_of_level(g.cdf(y))

    def log_conditional_tail(self, log_tail_x: np.ndarray, one_minus_2v: np.ndarray) -> np.ndarray:
        """log P[X > x | G(Y) = v] from log Fbar(x) and (1 - 2v)."""
        if self.is_independent:
            return log_tail_x
        cdf_x = -np.expm1(log_tail_x)
        return log_tail_x + np.log1p(-self.theta * cdf_x * one_minus_2v)

    def conditional_tail(self, f: TailModel, x, y, g: TailModel | None = None):
        g = g or self.g
        lt = np.asarray(f.log_tail(x))
        if self.is_independent:
            return np.exp(lt)
        v = np.asarray(g.cdf(y))
        return np.exp(self.log_conditional_tail(lt, 1.0 - 2.0 * v))

    def to_dict(self) -> dict:
        if self.is_independent and self.kind == "independent":
            return {"kind": "independent"}
        return {"kind": self.kind, "theta": self.theta}


INDEPENDENT = DependenceKernel()


def fgm_kernel(theta: float, g: TailModel | None = None) -> DependenceKernel:
    if g is not None and not g.continuous and theta != 0.0:
        raise DomainError("FGM kernels need a continuous G (conditioning on Y = y is ambiguous otherwise)")
    return DependenceKernel("fgm", float(theta), g)


def kernel_from_dict(d: dict | None) -> DependenceKernel:
    if d is None:
        return INDEPENDENT
    extra = set(d) - {"kind", "theta"}
    if extra:
        raise DomainError(f"unknown dependence keys: {sorted(extra)}")
    kind = d.get("kind", "independent")
    if kind == "independent":
        return INDEPENDENT
    if kind == "fgm":
        return fgm_kernel(float(d["theta"]))
    raise DomainError(f"unknown dependence kind {kind!r}")


def kernel_mean(kernel: DependenceKernel, g: TailModel | None = None, order: int = 32) -> float:
    """E[h(Y)] by Gauss-Legendre quadrature in the grade of Y."""
    g = g or kernel.g
    if kernel.is_independent:
        return 1.0
    t, w = np.polynomial.legendre.leggauss(order)
    # panels in v avoid the endpoints where the survival inverse is singular
    edges = np.linspace(0.0, 1.0, 9)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v = 0.5 * (a + b) + 0.5 * (b - a) * t
        y = g.quantile(v)
        total += 0.5 * (b - a) * np.sum(w * kernel.h(y, g))
    return float(total)


def fgm_conditional_level(theta_k: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve s (1 - k (1 - s)) = q for s in (0, 1], s = 1 - u.

    This is the conditional-cdf equation u (1 + k (1 - u)) = w written for the
    survival level s = 1 - u and q = 1 - w, using the cancellation-free root.
    """
    k = np.asarray(theta_k, dtype=float)
    disc = (1.0 - k) ** 2 + 4.0 * k * q
    s = 2.0 * q / ((1.0 - k) + np.sqrt(np.maximum(disc, 0.0)))
    if np.any(~np.isfinite(s)) or np.any((s <= 0) | (s > 1 + 1e-12)):
        raise ArithmeticError("FGM conditional inversion left [0, 1]")
    return np.minimum(s, 1.0)


def sample_pair(
    kernel: DependenceKernel, f: TailModel, g: TailModel, stream: RngStream, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """n draws of (X, Y) with marginals F, G coupled by ``kernel``."""
    if kernel.is_independent:
        return f.sample(stream, n), g.sample(stream, n)
    r = stream.uniform_open(n)  # survival grade of Y
    y = g._isf(r)
    one_minus_2v = 2.0 * r - 1.0
    q = stream.uniform_open(n)
    s = fgm_conditional_level(kernel.theta * one_minus_2v, q)
    return f._isf(s), y


@dataclass
class AssumptionReport:
    name: str
    verdict: str
    curves: list[RatioCurve] = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "parameters": self.parameters,
            "note": self.note,
            "curves": [c.to_dict() for c in self.curves],
        }


def verify_assumption_B(
    kernel: DependenceKernel, f: TailModel, g: TailModel, x_grid, y_grid
) -> RatioCurve:
    """Per x, the sup over y of |P[X > x | Y = y] / (h(y) Fbar(x)) - 1|."""
    xs = np.asarray(x_grid, dtype=float)
    ys = np.asarray(y_grid, dtype=float)
    if kernel.is_independent:
        return make_curve("assumption_B_deviation", xs, np.full(xs.shape, -np.inf))
    lt = np.asarray(f.log_tail(xs))[:, None]
    v = np.asarray(g.cdf(ys))[None, :]
    log_cond = kernel.log_conditional_tail(lt, 1.0 - 2.0 * v)
    h = kernel.h_of_level(v)
    with np.errstate(divide="ignore"):
        dev = np.abs(np.expm1(log_cond - lt - np.log(h)))
        return make_curve("assumption_B_deviation", xs, np.log(dev.max(axis=1)))


def verify_assumption_A(
    g: TailModel,
    h_model: TailModel,
    c_grid=(0.5, 1.0, 2.0),
    x_grid=None,
    tol: Tolerances | None = None,
) -> AssumptionReport:
    """For each c, Gbar(cx) / Hbar(x) must vanish."""
    tol = tol or Tolerances()
    xs = GridSpec().xs(h_model) if x_grid is None else np.asarray(x_grid, dtype=float)
    lh = np.asarray(h_model.log_tail(xs))
    curves, verdicts = [], []
    for c in c_grid:
        with np.errstate(invalid="ignore"):
            lr = np.asarray(g.log_tail(c * xs)) - lh
        curve = make_curve(f"gbar_cx_over_hbar(c={c:g})", xs, lr)
        curves.append(curve)
        top = curve.log_values[curve.top]
        if np.all(np.isneginf(top)) or (curve.top_max < tol.m_threshold and is_falling(curve, tol)):
            verdicts.append(HOLDS)
        elif is_flat(curve, tol) and curve.top_min > tol.m_threshold:
            verdicts.append(FAILS)
        else:
            verdicts.append(INCONCLUSIVE)
    if all(v == HOLDS for v in verdicts):
        verdict = HOLDS
    elif any(v == FAILS for v in verdicts):
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    note = "finite right endpoint of G" if math.isfinite(g.support_right) else ""
    return AssumptionReport("assumption_A", verdict, curves, {"c": list(c_grid)}, note)
