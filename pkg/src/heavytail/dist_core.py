"""Univariate tail models.

Every model is an immutable object exposing ``log_tail(x) = log P[X > x]``;
the remaining functionals (tail, cdf, quantile, survival inverse, integrated
tail, mean, sampler) are derived from it, with closed forms where a family
has them. Working with log tails keeps ratios such as ``F(bx)/F(x)``
meaningful far beyond the range where the tails underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np
from scipy import optimize, special
from scipy.interpolate import PchipInterpolator

from .quadrature import log_integrate
from .rng import RngStream

LOG_TINY = -745.0  # log of the smallest positive double
LOG_FLOOR = -1e6  # deepest log-tail level the numerics resolve
_COSTLY_FLOOR = -2000.0
_S_MAX = float(np.arcsinh(1e300))


class DomainError(ValueError):
    """A model does not satisfy the precondition of an operation."""


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


class TailModel:
    """Base class. Subclasses implement ``_log_tail`` on float arrays."""

    continuous: bool = True
    # tails needing nested quadrature invert from an interpolated table only
    costly: bool = False

    # -- support ---------------------------------------------------------
    @property
    def support_left(self) -> float:
        return 0.0

    @property
    def support_right(self) -> float:
        return math.inf

    @property
    def non_negative(self) -> bool:
        return self.support_left >= 0.0

    # -- tails -----------------------------------------------------------
    def _log_tail(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_tail(self, x):
        arr, scalar = _as_array(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.minimum(self._log_tail(arr), 0.0)
        return _ret(out, scalar)

    def tail(self, x):
        """P[X > x], clamped to [0, 1]."""
        arr, scalar = _as_array(x)
        return _ret(np.exp(self.log_tail(arr)), scalar)

    def cdf(self, x):
        arr, scalar = _as_array(x)
        return _ret(-np.expm1(self.log_tail(arr)), scalar)

    # -- inverses --------------------------------------------------------
    def _isf(self, w: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self._isf_log(np.log(w))

    def _isf_log(self, log_w: np.ndarray) -> np.ndarray:
        return _invert_log_tail(self, log_w)

    def isf(self, w):
        """Smallest x with P[X > x] <= w, for w in (0, 1]."""
        arr, scalar = _as_array(w)
        if np.any((arr <= 0) | (arr > 1)):
            raise DomainError("survival probability must lie in (0, 1]")
        return _ret(self._isf(arr), scalar)

    def isf_log(self, log_w):
        """Survival inverse addressed by log probability, for levels below 1e-308."""
        arr, scalar = _as_array(log_w)
        if np.any(arr > 0):
            raise DomainError("log survival probability must be <= 0")
        return _ret(self._isf_log(arr), scalar)

    def quantile(self, u):
        """Inverse cdf at u in (0, 1)."""
        arr, scalar = _as_array(u)
        if np.any((arr < 0) | (arr >= 1)):
            raise DomainError("quantile level must lie in [0, 1)")
        return _ret(self._isf(1.0 - arr), scalar)

    def sample(self, stream: RngStream, n: int) -> np.ndarray:
        """``n`` i.i.d. draws by survival-side inversion."""
        return self._isf(stream.uniform_open(n))

    # -- integrals -------------------------------------------------------
    def _log_tail_integral(self, x: np.ndarray) -> np.ndarray:
        return _generic_log_tail_integral(self, x)

    def log_tail_integral(self, x):
        """log of the integral of the tail from x to infinity."""
        arr, scalar = _as_array(x)
        return _ret(self._log_tail_integral(arr), scalar)

    @cached_property
    def mean(self) -> float:
        if not self.non_negative:
            raise DomainError("numeric mean requires a non-negative model")
        return float(np.exp(self._log_tail_integral(np.array([0.0]))[0]))

    def squared(self) -> "TailModel":
        """Model whose tail is the square of this tail (minimum of two copies)."""
        return SquaredTail(self)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def _table(self, floor: float | None = None):
        """Cached (s, log_tail, inverse interpolant, forward interpolant, complete).

        Cheap models tabulate once down to LOG_FLOOR. Costly models start at a
        shallower floor and are re-tabulated deeper only when a caller asks.
        """
        want = LOG_FLOOR if not self.costly else min(floor if floor is not None else 0.0, _COSTLY_FLOOR)
        cache = self.__dict__.get("_table_cache")
        if cache is not None and (cache[0] <= want or cache[5]):
            return cache[1:]
        s, L = _build_inversion_table(self, 2049, floor=want)
        ok = np.isfinite(L)
        neg_l, first = np.unique(-L[ok], return_index=True)
        inverse = PchipInterpolator(neg_l, s[ok][first], extrapolate=False)
        forward = PchipInterpolator(s[ok], L[ok], extrapolate=False)
        complete = s[-1] >= _S_MAX or math.isfinite(self.support_right) or L[-1] == -np.inf
        self.__dict__["_table_cache"] = (want, s, L, inverse, forward, complete)
        return s, L, inverse, forward, complete

    def log_tail_fast(self, x):
        """log tail from the cached table (costly models) or exactly (others).

        Costly models are tabulated once on an adaptive asinh grid and
        interpolated monotonically; used inside outer integrals where each
        exact evaluation would itself be a quadrature.
        """
        if not self.costly:
            return self.log_tail(x)
        x = np.asarray(x, dtype=float)
        s_tab, _, _, forward, _ = self._table()
        s = np.arcsinh(x)
        out = forward(s)
        out = np.where(s <= s_tab[0], 0.0, out)
        miss = np.isnan(out)
        if miss.any():
            out[miss] = self.log_tail(x[miss])
        return np.minimum(out, 0.0)


# ---------------------------------------------------------------------------
# Closed-form families


@dataclass(frozen=True)
class Pareto(TailModel):
    alpha: float
    xm: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.xm > 0):
            raise DomainError("Pareto needs alpha > 0 and xm > 0")

    @property
    def support_left(self) -> float:
        return self.xm

    def _log_tail(self, x):
        return np.where(x <= self.xm, 0.0, self.alpha * (np.log(self.xm) - np.log(np.maximum(x, self.xm))))

    def _isf(self, w):
        return self.xm * w ** (-1.0 / self.alpha)

    def _isf_log(self, log_w):
        return self.xm * np.exp(-log_w / self.alpha)

    def _log_tail_integral(self, x):
        if self.alpha <= 1:
            return np.full(x.shape, np.inf)
        a = self.alpha
        above = np.log(self.xm) * a + (1 - a) * np.log(np.maximum(x, self.xm)) - np.log(a - 1)
        below = np.log(self.xm - np.minimum(x, self.xm) + self.xm / (a - 1))
        return np.where(x >= self.xm, above, below)

    @cached_property
    def mean(self) -> float:
        return math.inf if self.alpha <= 1 else self.alpha * self.xm / (self.alpha - 1)

    def squared(self):
        return Pareto(2 * self.alpha, self.xm)

    def to_dict(self):
        return {"family": "pareto", "alpha": self.alpha, "xm": self.xm}


@dataclass(frozen=True)
class Weibull(TailModel):
    """Tail exp(-(x/lam)^tau); heavy for tau < 1."""

    tau: float
    lam: float = 1.0

    def __post_init__(self):
        if not (0 < self.tau <= 1 and self.lam > 0):
            raise DomainError("Weibull needs tau in (0, 1] and lambda > 0")

    def _log_tail(self, x):
        return -((np.maximum(x, 0.0) / self.lam) ** self.tau)

    def _isf(self, w):
        return self.lam * (-np.log(w)) ** (1.0 / self.tau)

    def _isf_log(self, log_w):
        return self.lam * (-log_w) ** (1.0 / self.tau)

    def _log_tail_integral(self, x):
        # int_x^inf exp(-(t/lam)^tau) dt = (lam/tau) Gamma(1/tau, (x/lam)^tau)
        a = 1.0 / self.tau
        z = (np.maximum(x, 0.0) / self.lam) ** self.tau
        above = math.log(self.lam / self.tau) + _log_upper_gamma(a, z)
        return np.where(x >= 0, above, np.logaddexp(np.log(np.maximum(-x, 1e-300)), above))

    @cached_property
    def mean(self) -> float:
        return self.lam * math.gamma(1 + 1 / self.tau)

    def squared(self):
        return Weibull(self.tau, self.lam * 2.0 ** (-1.0 / self.tau))

    def to_dict(self):
        return {"family": "weibull", "tau": self.tau, "lambda": self.lam}


@dataclass(frozen=True)
class Lognormal(TailModel):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Lognormal needs sigma > 0")

    def _log_tail(self, x):
        pos = x > 0
        z = (np.log(np.where(pos, x, 1.0)) - self.mu) / self.sigma
        return np.where(pos, special.log_ndtr(-z), 0.0)

    def _isf(self, w):
        return np.exp(self.mu - self.sigma * special.ndtri(w))

    def _isf_log(self, log_w):
        return np.exp(self.mu - self.sigma * special.ndtri_exp(log_w))

    def _log_tail_integral(self, x):
        # E[(X - x)^+] = E[X] Phibar(d - sigma) - x Phibar(d), d = (log x - mu) / sigma
        pos = x > 0
        d = (np.log(np.where(pos, x, 1.0)) - self.mu) / self.sigma
        log_a = self.mu + 0.5 * self.sigma**2 + special.log_ndtr(self.sigma - d)
        log_b = np.log(np.where(pos, x, 1.0)) + special.log_ndtr(-d)
        above = log_a + np.log1p(-np.exp(log_b - log_a))
        below = np.log(self.mean - np.where(pos, 0.0, x))
        return np.where(pos, above, below)

    @cached_property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def to_dict(self):
        return {"family": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Exponential(TailModel):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("Exponential needs rate > 0")

    def _log_tail(self, x):
        return -self.rate * np.maximum(x, 0.0)

    def _isf(self, w):
        return -np.log(w) / self.rate

    def _isf_log(self, log_w):
        return -log_w / self.rate

    def _log_tail_integral(self, x):
        below = np.log(np.maximum(-x, 0.0) + 1.0 / self.rate)
        return np.where(x >= 0, -self.rate * x - np.log(self.rate), below)

    @cached_property
    def mean(self) -> float:
        return 1.0 / self.rate

    def squared(self):
        return Exponential(2 * self.rate)

    def to_dict(self):
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class UniformPos(TailModel):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi > self.lo):
            raise DomainError("UniformPos needs 0 <= lo < hi")

    @property
    def support_left(self):
        return self.lo

    @property
    def support_right(self):
        return self.hi

    def _log_tail(self, x):
        frac = (self.hi - np.clip(x, self.lo, self.hi)) / (self.hi - self.lo)
        with np.errstate(divide="ignore"):
            return np.log(frac)

    def _isf(self, w):
        return self.hi - w * (self.hi - self.lo)

    def _isf_log(self, log_w):
        return self._isf(np.exp(log_w))

    def _log_tail_integral(self, x):
        c = np.clip(x, self.lo, self.hi)
        val = np.maximum(self.lo - x, 0.0) + (self.hi - c) ** 2 / (2 * (self.hi - self.lo))
        with np.errstate(divide="ignore"):
            return np.log(val)

    def moment(self, power: float) -> float:
        """E[Y^power] in closed form."""
        p1 = power + 1
        return (self.hi**p1 - self.lo**p1) / (p1 * (self.hi - self.lo))

    @cached_property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_dict(self):
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class PointMass(TailModel):
    c: float = 1.0
    continuous = False

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError("PointMass needs c >= 0")

    @property
    def support_left(self):
        return self.c

    @property
    def support_right(self):
        return self.c

    def _log_tail(self, x):
        return np.where(x < self.c, 0.0, -np.inf)

    def _isf(self, w):
        return np.full(np.shape(w), float(self.c))

    def _isf_log(self, log_w):
        return np.full(np.shape(log_w), float(self.c))

    def _log_tail_integral(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(self.c - x, 0.0))

    @cached_property
    def mean(self) -> float:
        return float(self.c)

    def to_dict(self):
        return {"family": "point_mass", "c": self.c}


# ---------------------------------------------------------------------------
# Composite models


@dataclass(frozen=True)
class Mixture(TailModel):
    """p * left + (1 - p) * right, with exact pointwise tail."""

    p: float
    left: TailModel
    right: TailModel

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError("mixture weight must lie in (0, 1)")

    @property
    def continuous(self):
        return self.left.continuous and self.right.continuous

    @property
    def support_left(self):
        return min(self.left.support_left, self.right.support_left)

    @property
    def support_right(self):
        return max(self.left.support_right, self.right.support_right)

    def _log_tail(self, x):
        return np.logaddexp(np.log(self.p) + self.left.log_tail(x), np.log1p(-self.p) + self.right.log_tail(x))

    def _log_tail_integral(self, x):
        return np.logaddexp(
            np.log(self.p) + self.left.log_tail_integral(x),
            np.log1p(-self.p) + self.right.log_tail_integral(x),
        )

    @cached_property
    def mean(self) -> float:
        return self.p * self.left.mean + (1 - self.p) * self.right.mean

    def sample(self, stream, n):
        pick = stream.uniform(n) < self.p
        a = self.left.sample(stream, n)
        b = self.right.sample(stream, n)
        return np.where(pick, a, b)

    def to_dict(self):
        return {"family": "mixture", "p": self.p, "left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True)
class Shifted(TailModel):
    """X - c; gives real-line instances while base families stay non-negative."""

    base: TailModel
    c: float

    @property
    def continuous(self):
        return self.base.continuous

    @property
    def support_left(self):
        return self.base.support_left - self.c

    @property
    def support_right(self):
        return self.base.support_right - self.c

    def _log_tail(self, x):
        return self.base.log_tail(x + self.c)

    def _isf(self, w):
        return self.base._isf(w) - self.c

    def _isf_log(self, log_w):
        return self.base._isf_log(log_w) - self.c

    def _log_tail_integral(self, x):
        return self.base.log_tail_integral(x + self.c)

    @cached_property
    def mean(self) -> float:
        return self.base.mean - self.c

    def sample(self, stream, n):
        return self.base.sample(stream, n) - self.c

    def to_dict(self):
        return {"family": "shift", "base": self.base.to_dict(), "c": self.c}


@dataclass(frozen=True)
class PositivePart(TailModel):
    """max(X, 0): the non-negative restriction used for subexponential checks."""

    base: TailModel
    continuous = False

    @property
    def support_left(self):
        return max(0.0, self.base.support_left)

    @property
    def support_right(self):
        return max(0.0, self.base.support_right)

    def _log_tail(self, x):
        return np.where(x < 0, 0.0, self.base.log_tail(np.maximum(x, 0.0)))

    def _isf(self, w):
        return np.maximum(self.base._isf(w), 0.0)

    def _isf_log(self, log_w):
        return np.maximum(self.base._isf_log(log_w), 0.0)

    def sample(self, stream, n):
        return np.maximum(self.base.sample(stream, n), 0.0)

    def to_dict(self):
        return {"family": "positive_part", "base": self.base.to_dict()}


@dataclass(frozen=True)
class SquaredTail(TailModel):
    """Tail equal to base tail squared."""

    base: TailModel

    @property
    def support_left(self):
        return self.base.support_left

    @property
    def support_right(self):
        return self.base.support_right

    def _log_tail(self, x):
        return 2.0 * self.base.log_tail(x)

    def _isf(self, w):
        return self.base._isf(np.sqrt(w))

    def _isf_log(self, log_w):
        return self.base._isf_log(0.5 * log_w)

    def to_dict(self):
        return {"family": "squared_tail", "base": self.base.to_dict()}


@dataclass(frozen=True)
class IndependentSum(TailModel):
    """X1 + X2 with independent non-negative summands."""

    f: TailModel
    g: TailModel
    dependence: str = "independent"
    costly = True

    def __post_init__(self):
        if not (self.f.non_negative and self.g.non_negative):
            raise DomainError("convolution requires non-negative summands")

    @property
    def continuous(self):
        return self.f.continuous or self.g.continuous

    @property
    def support_left(self):
        return self.f.support_left + self.g.support_left

    @property
    def support_right(self):
        return self.f.support_right + self.g.support_right

    def _log_tail(self, x):
        return log_convolve_tail(self.f, self.g, x)

    @cached_property
    def mean(self) -> float:
        return self.f.mean + self.g.mean

    def sample(self, stream, n):
        return self.f.sample(stream, n) + self.g.sample(stream, n)

    def to_dict(self):
        return {"family": "sum", "f": self.f.to_dict(), "g": self.g.to_dict(), "dependence": self.dependence}


@dataclass(frozen=True)
class StoppingTime:
    """Distribution of a non-negative integer count N."""

    pmf: tuple[tuple[int, float], ...]
    truncation_error: float = 0.0

    def __post_init__(self):
        ns = [n for n, _ in self.pmf]
        ps = [p for _, p in self.pmf]
        if any(n < 0 for n in ns) or any(not 0 <= p <= 1 for p in ps):
            raise DomainError("pmf needs non-negative integers and probabilities in [0, 1]")
        if abs(sum(ps) - 1.0) > 1e-12:
            raise DomainError("pmf must sum to one")
        if dict(self.pmf).get(0, 0.0) >= 1.0:
            raise DomainError("N is degenerate at zero")

    @property
    def kappa(self) -> int:
        """Smallest support point >= 1 (one when zero carries mass)."""
        support = sorted(n for n, p in self.pmf if p > 0)
        return 1 if support[0] == 0 else support[0]

    @property
    def n_max(self) -> int:
        return max(n for n, p in self.pmf if p > 0)

    @classmethod
    def uniform(cls, values: Sequence[int]) -> "StoppingTime":
        values = list(values)
        return cls(tuple((int(v), 1.0 / len(values)) for v in values))

    @classmethod
    def poisson(cls, lam: float, n_max: int = 20, max_truncation: float = 1e-6) -> "StoppingTime":
        from scipy.stats import poisson

        ks = np.arange(n_max + 1)
        pk = poisson.pmf(ks, lam)
        trunc = float(poisson.sf(n_max, lam))
        if trunc > max_truncation:
            raise DomainError(f"Poisson({lam}) truncated at {n_max} loses mass {trunc:.3g} > {max_truncation:g}")
        pk = pk / pk.sum()
        return cls(tuple((int(k), float(p)) for k, p in zip(ks, pk)), truncation_error=trunc)

    def sample(self, stream: RngStream, n: int) -> np.ndarray:
        ns = np.array([k for k, _ in self.pmf])
        cum = np.cumsum([p for _, p in self.pmf])
        idx = np.searchsorted(cum, stream.uniform(n), side="right")
        return ns[np.minimum(idx, len(ns) - 1)]

    def to_dict(self):
        return {"pmf": [[n, p] for n, p in self.pmf]}


@dataclass(frozen=True)
class StoppedSum(TailModel):
    """S_N for i.i.d. non-negative summands independent of N."""

    base: TailModel
    stopping: StoppingTime
    costly = True

    def __post_init__(self):
        if not self.base.non_negative:
            raise DomainError("stopped sums require non-negative summands")

    @cached_property
    def _folds(self) -> dict[int, TailModel]:
        folds: dict[int, TailModel] = {1: self.base}
        for n in range(2, self.stopping.n_max + 1):
            folds[n] = IndependentSum(folds[n - 1], self.base)
        return folds

    def _log_tail(self, x):
        acc = np.full(x.shape, -np.inf)
        for n, p in self.stopping.pmf:
            if p <= 0:
                continue
            term = np.where(x < 0, 0.0, -np.inf) if n == 0 else self._folds[n].log_tail(x)
            acc = np.logaddexp(acc, np.log(p) + term)
        return acc

    @cached_property
    def mean(self) -> float:
        return self.base.mean * sum(n * p for n, p in self.stopping.pmf)

    def sample(self, stream, n):
        counts = self.stopping.sample(stream, n)
        total = int(counts.sum())
        draws = self.base.sample(stream, total)
        out = np.zeros(n)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        nz = counts > 0
        out[nz] = np.add.reduceat(draws, starts[nz]) if total else 0.0
        return out

    def to_dict(self):
        return {"family": "stopped_sum", "base": self.base.to_dict(), "stopping": self.stopping.to_dict()}


# ---------------------------------------------------------------------------
# Generic numerics


def _log_upper_gamma(a: float, z: np.ndarray) -> np.ndarray:
    """log Gamma(a, z), the unregularised upper incomplete gamma function."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    small = z < 500.0
    with np.errstate(divide="ignore"):
        out[small] = np.log(special.gammaincc(a, z[small])) + special.gammaln(a)
    zb = z[~small]
    if zb.size:
        # asymptotic series z^(a-1) e^(-z) sum_k (a-1)(a-2)...(a-k) / z^k
        term = np.ones_like(zb)
        total = np.ones_like(zb)
        for k in range(1, 30):
            term = term * (a - k) / zb
            total += term
            if np.all(np.abs(term) < 1e-17 * np.abs(total)):
                break
        out[~small] = (a - 1.0) * np.log(zb) - zb + np.log(total)
    return out


def _build_inversion_table(
    model: TailModel, size: int = 2049, max_step: float = 0.05, floor: float = LOG_FLOOR
) -> tuple[np.ndarray, np.ndarray]:
    """Grid in s = asinh(x) with log tails, refined until adjacent log tails differ by <= max_step."""
    lo, hi = model.support_left, model.support_right
    s_lo = float(np.arcsinh(lo)) if math.isfinite(lo) else -_S_MAX
    if math.isfinite(hi):
        s_hi = float(np.arcsinh(hi))
    else:
        s_hi = max(s_lo, 0.0) + 1.0
        while s_hi < _S_MAX and model.log_tail(np.sinh(s_hi)) > floor:
            s_hi = min(_S_MAX, s_hi + max(2.0, 0.5 * s_hi))
    s = np.linspace(s_lo, s_hi, size)
    if s_hi < _S_MAX and not math.isfinite(hi) and not model.costly:
        s = np.append(s, _S_MAX)
    L = np.asarray(model.log_tail(np.sinh(s)), dtype=float)
    for _ in range(12):
        with np.errstate(invalid="ignore"):
            jump = np.abs(np.diff(L))
        coarse = (jump > max_step * np.maximum(1.0, np.abs(L[1:]))) & np.isfinite(L[1:]) & (np.diff(s) > 1e-9 * np.maximum(1.0, np.abs(s[1:])))
        if not coarse.any():
            break
        mids = 0.5 * (s[:-1] + s[1:])[coarse]
        s = np.concatenate([s, mids])
        L = np.concatenate([L, np.asarray(model.log_tail(np.sinh(mids)), dtype=float)])
        order = np.argsort(s)
        s, L = s[order], L[order]
    if model.costly:
        s, L = _refine_by_interpolation_error(model, s, L)
    return s, L


def _refine_by_interpolation_error(model, s, L, tol: float = 1e-8, rounds: int = 12):
    """Bisect table intervals whose quarter points disagree with the monotone interpolant."""
    flagged = np.ones(s.size - 1, dtype=bool)
    for _ in range(rounds):
        ok = np.isfinite(L)
        cand = flagged & ok[:-1] & ok[1:] & (np.diff(s) > 1e-9 * np.maximum(1.0, np.abs(s[1:])))
        if not cand.any():
            break
        interp = PchipInterpolator(s[ok], L[ok], extrapolate=False)
        left, width = s[:-1][cand], np.diff(s)[cand]
        probes = np.concatenate([left + 0.25 * width, left + 0.75 * width])
        exact = np.asarray(model.log_tail(np.sinh(probes)), dtype=float)
        err = np.abs(exact - interp(probes)) / np.maximum(1.0, np.abs(exact))
        half = cand.sum()
        bad = ~((err[:half] <= tol) & (err[half:] <= tol))
        if not bad.any():
            break
        # keep the probes of failing intervals; each splits into three pieces
        keep = np.concatenate([bad, bad])
        s_new = np.concatenate([s, probes[keep]])
        L_new = np.concatenate([L, exact[keep]])
        order = np.argsort(s_new)
        s, L = s_new[order], L_new[order]
        is_new = np.zeros(s.size, dtype=bool)
        is_new[np.searchsorted(s, probes[keep])] = True
        # an interval's interpolant depends on the nodes next to it as well
        near = is_new.copy()
        near[1:] |= is_new[:-1]
        near[:-1] |= is_new[1:]
        flagged = near[:-1] | near[1:]
    return s, L


def _solve_few(model: TailModel, target: np.ndarray) -> np.ndarray:
    """Root-find a handful of levels directly, sparing a costly model its table."""
    s_lo = float(np.arcsinh(model.support_left)) if math.isfinite(model.support_left) else -_S_MAX
    s_top = float(np.arcsinh(model.support_right)) if math.isfinite(model.support_right) else _S_MAX
    out = np.empty(target.size)
    for i, t in enumerate(target):
        fun = lambda s: float(model.log_tail(np.sinh(s))) - t
        if fun(s_lo) <= 0:
            out[i] = np.sinh(s_lo)
            continue
        hi = max(s_lo, 0.0) + 1.0
        while hi < s_top and fun(hi) > 0:
            hi = min(s_top, hi + max(2.0, 0.5 * hi))
        if fun(hi) > 0:
            out[i] = np.sinh(hi)
            continue
        out[i] = np.sinh(optimize.brentq(fun, s_lo, hi, xtol=1e-14, rtol=1e-15))
    return out


def _invert_log_tail(model: TailModel, target: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Smallest x with log_tail(x) <= target, by safeguarded regula falsi in asinh(x)."""
    target = np.asarray(target, dtype=float)
    shape = target.shape
    target = target.ravel()
    if model.costly and target.size <= 8 and "_table_cache" not in model.__dict__:
        return _solve_few(model, target).reshape(shape)
    finite = target[np.isfinite(target)]
    deepest = float(finite.min()) if finite.size else 0.0
    s, L, inverse, _, _ = model._table(1.5 * deepest - 10.0 if model.costly else None)
    idx = np.searchsorted(-L, -target, side="left")
    out = np.empty(target.shape)
    at_left = idx == 0
    beyond = idx >= len(s)
    out[at_left] = s[0]
    out[beyond] = s[-1]
    act = np.nonzero(~at_left & ~beyond)[0]
    if model.costly:
        out[act] = inverse(-target[act])
        return np.sinh(out).reshape(shape)
    a = s[idx[act] - 1]
    b = s[idx[act]]
    fa = L[idx[act] - 1] - target[act]
    fb = L[idx[act]] - target[act]
    side = np.zeros(act.size, dtype=int)
    for _ in range(max_iter):
        if act.size == 0:
            break
        width = b - a
        done = (width <= 4e-16 * np.maximum(1.0, np.abs(b))) | (fb == 0)
        if done.all():
            break
        usable = np.isfinite(fa) & np.isfinite(fb) & (fa != fb)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(usable, b - fb * (b - a) / (fb - fa), 0.5 * (a + b))
        bad = ~((c > a) & (c < b))
        c = np.where(bad, 0.5 * (a + b), c)
        fc = np.asarray(model.log_tail(np.sinh(c)), dtype=float) - target[act]
        move_a = fc > 0
        # Illinois: damp the stale endpoint when the same side moves twice
        a_new = np.where(move_a, c, a)
        b_new = np.where(move_a, b, c)
        fa_new = np.where(move_a, fc, np.where(side == -1, fa * 0.5, fa))
        fb_new = np.where(move_a, np.where(side == 1, fb * 0.5, fb), fc)
        side = np.where(move_a, 1, -1)
        keep = ~done
        a = np.where(keep, a_new, a)
        b = np.where(keep, b_new, b)
        fa = np.where(keep, fa_new, fa)
        fb = np.where(keep, fb_new, fb)
        # secant damping makes f values stale; refresh convergence by width only
    out[act] = b
    return np.sinh(out).reshape(shape)


_T_EDGES = np.concatenate([[0.0], np.geomspace(1e-10, 1.0, 11), [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]])


def _log_int_from(model: TailModel, a: np.ndarray, rtol: float = 1e-11) -> np.ndarray:
    """log of the tail integral from a > 0 to infinity, via y = a * exp(t)."""
    t_max = np.log(1e300 / a)
    edges = np.minimum(_T_EDGES[None, :], t_max[:, None])
    la = np.log(a)

    def logf(t, rows):
        y = a[rows][:, None, None] * np.exp(t)
        return la[rows][:, None, None] + t + model.log_tail(y)

    val, _ = log_integrate(logf, edges, rtol=rtol)
    return val


def _log_int_finite(model: TailModel, a: np.ndarray, b: float, panels: int = 16) -> np.ndarray:
    frac = np.linspace(0.0, 1.0, panels + 1)
    edges = a[:, None] + (b - a)[:, None] * frac[None, :]

    def logf(y, rows):
        return model.log_tail(y)

    val, _ = log_integrate(logf, edges, rtol=1e-11)
    return val


def _generic_log_tail_integral(model: TailModel, x: np.ndarray) -> np.ndarray:
    if not model.non_negative:
        raise DomainError("tail integral needs a non-negative model (or an override)")
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    sl, sr = model.support_left, model.support_right
    a = np.maximum(flat, sl)
    head = np.maximum(sl - flat, 0.0)  # tail equals one below the support
    with np.errstate(divide="ignore"):
        out = np.log(head)
    if math.isfinite(sr):
        live = a < sr
        if live.any():
            out[live] = np.logaddexp(out[live], _log_int_finite(model, a[live], sr))
        return out.reshape(x.shape)
    zero = a <= 0
    if zero.any():
        c = float(model.isf(0.5))
        c = c if c > 0 else 1.0
        edges = np.concatenate([[0.0], np.geomspace(1e-12 * c, c, 13)])
        lo, _ = log_integrate(lambda y, rows: model.log_tail(y), edges, rtol=1e-11)
        hi = _log_int_from(model, np.array([c]))
        out[zero] = np.logaddexp(out[zero], np.logaddexp(lo[0], hi[0]))
    pos = ~zero
    if pos.any():
        out[pos] = np.logaddexp(out[pos], _log_int_from(model, a[pos]))
    return out.reshape(x.shape)


def _quantile_space_logint(model: TailModel, upper: np.ndarray, logphi: Callable, panels: int = 20) -> np.ndarray:
    """log of the integral of exp(logphi(y, rows)) against model's law over [support_left, upper].

    Substituting y = Q(u) turns the Stieltjes integral into one over u in
    (0, F(upper)); the part with u > 1/2 is done in w = 1 - u through the
    survival inverse so that deep upper quantiles keep full precision.
    """
    n = upper.size
    cdf_up = np.asarray(model.cdf(upper))
    log_w_up = np.asarray(model.log_tail(upper))
    out = np.full(n, -np.inf)

    lo_end = np.minimum(cdf_up, 0.5)
    live = lo_end > 0
    if live.any():
        r_hi = np.log(lo_end[live])
        r_lo = np.minimum(np.log(1e-30), r_hi)
        edges = r_lo[:, None] + (r_hi - r_lo)[:, None] * np.linspace(0, 1, panels + 1)[None, :]
        idx = np.nonzero(live)[0]

        def lower(r, rows):
            u = np.exp(r)
            y = model.quantile(np.minimum(u, 1 - 1e-16))
            return r + logphi(y, idx[rows])

        val, _ = log_integrate(lower, edges, rtol=1e-9)
        out[live] = val
    up = cdf_up > 0.5
    if up.any():
        idx = np.nonzero(up)[0]
        lw_lo = np.maximum(log_w_up[up], LOG_FLOOR)
        lw_hi = np.full(idx.size, np.log(0.5))
        edges = lw_lo[:, None] + (lw_hi - lw_lo)[:, None] * np.linspace(0, 1, panels + 1)[None, :]

        def upper_part(lw, rows):
            y = model._isf_log(lw)
            return lw + logphi(y, idx[rows])

        val, _ = log_integrate(upper_part, edges, rtol=1e-9)
        out[up] = np.logaddexp(out[up], val)
    return out


def log_convolve_tail(f: TailModel, g: TailModel, x) -> np.ndarray:
    """log P[X1 + X2 > x] for independent non-negative X1 ~ f, X2 ~ g.

    Uses the exact split at x/2:
      F(x) + int_[0,x/2] G(x-y) f(dy) + int_[0,x/2] (F(x-z) - F(x)) g(dz)
      + G(x/2) (F(x/2) - F(x)),
    with every F, G a tail. Each term is non-negative, so the sum is formed in
    log space without cancellation.
    """
    if not (f.non_negative and g.non_negative):
        raise DomainError("convolve_tail requires non-negative models (use PositivePart)")
    arr, scalar = _as_array(x)
    flat = arr.ravel()
    out = np.zeros(flat.shape)
    pos = flat > 0
    if pos.any():
        xs = flat[pos]
        half = 0.5 * xs
        lf_x = np.asarray(f.log_tail(xs))
        lf_h = np.asarray(f.log_tail(half))
        lg_h = np.asarray(g.log_tail(half))
        t1 = lf_x

        t2 = _quantile_space_logint(f, half, lambda y, rows: g.log_tail_fast(xs[rows][:, None, None] - y))

        def diff(z, rows):
            la = f.log_tail_fast(xs[rows][:, None, None] - z)
            lb = lf_x[rows][:, None, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                return la + np.log(-np.expm1(lb - la))

        t3 = _quantile_space_logint(g, half, diff)
        with np.errstate(invalid="ignore", divide="ignore"):
            t4 = lg_h + lf_h + np.log(-np.expm1(lf_x - lf_h))
        total = np.logaddexp(np.logaddexp(t1, t2), np.logaddexp(t3, np.nan_to_num(t4, nan=-np.inf)))
        out[pos] = np.minimum(total, 0.0)
    return _ret(out.reshape(arr.shape), scalar)


# ---------------------------------------------------------------------------
# Module-level operations


def tail(model: TailModel, x):
    return model.tail(x)


def sample(model: TailModel, stream: RngStream, n: int) -> np.ndarray:
    return model.sample(stream, n)


def integrated_tail(model: TailModel, x):
    """Tail of the integrated-tail distribution, (1/E X) * int_x^inf F(y) dy."""
    if model.support_left < 0:
        raise DomainError("integrated tail needs support in [0, inf)")
    m = model.mean
    if not (0 < m < math.inf):
        raise DomainError(f"integrated tail needs a positive, finite expectation (mean={m})")
    arr, scalar = _as_array(x)
    return _ret(np.exp(model.log_tail_integral(arr) - math.log(m)), scalar)


def convolve_tail(f: TailModel, g: TailModel, x):
    """P[X1 + X2 > x] for independent non-negative summands."""
    arr, scalar = _as_array(x)
    return _ret(np.exp(log_convolve_tail(f, g, arr)), scalar)


def mixture(p: float, f: TailModel, g: TailModel) -> Mixture:
    return Mixture(p, f, g)


# ---------------------------------------------------------------------------
# JSON schema

_BUILDERS: dict[str, tuple[set[str], Callable[[dict], TailModel]]] = {}


def register_family(name: str, keys: set[str], builder: Callable[[dict], TailModel]) -> None:
    _BUILDERS[name] = (keys, builder)


def from_dict(spec: dict) -> TailModel:
    """Build a model from its JSON object; unknown keys are rejected."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise DomainError(f"model spec must be an object with a 'family' key: {spec!r}")
    name = spec["family"]
    if name not in _BUILDERS:
        raise DomainError(f"unknown family {name!r}")
    keys, builder = _BUILDERS[name]
    extra = set(spec) - keys - {"family"}
    if extra:
        raise DomainError(f"unknown keys for {name}: {sorted(extra)}")
    try:
        return builder(spec)
    except KeyError as exc:
        raise DomainError(f"missing key {exc} for family {name}") from None


def stopping_from_dict(spec: dict) -> StoppingTime:
    kind = spec.get("kind", "pmf")
    if kind == "poisson":
        extra = set(spec) - {"kind", "lam", "n_max"}
        if extra:
            raise DomainError(f"unknown keys for poisson stopping time: {sorted(extra)}")
        return StoppingTime.poisson(float(spec["lam"]), int(spec.get("n_max", 20)))
    if kind == "uniform":
        return StoppingTime.uniform(spec["values"])
    return StoppingTime(tuple((int(n), float(p)) for n, p in spec["pmf"]))


register_family("pareto", {"alpha", "xm"}, lambda s: Pareto(float(s["alpha"]), float(s.get("xm", 1.0))))
register_family("weibull", {"tau", "lambda"}, lambda s: Weibull(float(s["tau"]), float(s.get("lambda", 1.0))))
register_family("lognormal", {"mu", "sigma"}, lambda s: Lognormal(float(s.get("mu", 0.0)), float(s.get("sigma", 1.0))))
register_family("exponential", {"rate"}, lambda s: Exponential(float(s.get("rate", 1.0))))
register_family("uniform", {"lo", "hi"}, lambda s: UniformPos(float(s.get("lo", 0.0)), float(s.get("hi", 1.0))))
register_family("point_mass", {"c"}, lambda s: PointMass(float(s["c"])))
register_family(
    "mixture", {"p", "left", "right"}, lambda s: Mixture(float(s["p"]), from_dict(s["left"]), from_dict(s["right"]))
)
register_family("shift", {"base", "c"}, lambda s: Shifted(from_dict(s["base"]), float(s["c"])))
register_family("positive_part", {"base"}, lambda s: PositivePart(from_dict(s["base"])))
register_family("squared_tail", {"base"}, lambda s: SquaredTail(from_dict(s["base"])))
register_family(
    "sum", {"f", "g", "dependence"}, lambda s: IndependentSum(from_dict(s["f"]), from_dict(s["g"]))
)
register_family(
    "stopped_sum",
    {"base", "stopping"},
    lambda s: StoppedSum(from_dict(s["base"]), stopping_from_dict(s["stopping"])),
)
