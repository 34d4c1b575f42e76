"""Random vectors, joint tails and the multivariate dominated-variation checks.

The joint tail of an n-vector is P[X_1 > t_1 x, ..., X_n > t_n x]. A
coordinate t_i = inf drops component i. Constructions with a closed form
(independent components, a common radial factor, FGM pairs, spectral
mixtures and their scalar products) evaluate it exactly in log space; sums
and stopped sums fall back to Monte Carlo on a cached draw set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import dist_core as dc
from .dependence import INDEPENDENT, DependenceKernel, kernel_from_dict, sample_pair
from .dist_core import DomainError, IndependentSum, Mixture, Pareto, PointMass, StoppedSum, StoppingTime, TailModel
from .product_conv import ClosureReport, ProductModel, grade_integral
from .rng import RngStream
from .tail_diagnostics import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    ClassVerdict,
    GridSpec,
    RatioCurve,
    Tolerances,
    _bounded_verdict,
    _num,
    check_class,
    combine,
    is_falling,
    is_flat,
    is_rising,
    make_curve,
)

INF = math.inf
DEFAULT_MC = 1_000_000


# ---------------------------------------------------------------------------
# scaled radial mixtures (marginals of radial constructions)


@dataclass(frozen=True)
class ScaledMixture(TailModel):
    """Law of c_D * R where the scale c_D >= 0 is drawn from a finite pmf."""

    radial: TailModel
    scales: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.scales) != len(self.weights) or not self.scales:
            raise DomainError("scales and weights must have equal, non-zero length")
        if any(s < 0 for s in self.scales) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise DomainError("scales must be >= 0 and weights must sum to one")

    @property
    def costly(self):
        return self.radial.costly

    @property
    def continuous(self):
        return self.radial.continuous and all(s > 0 for s in self.scales)

    @property
    def support_left(self):
        vals = [s * self.radial.support_left for s in self.scales if s > 0]
        return min(vals + ([0.0] if 0.0 in self.scales else []))

    @property
    def support_right(self):
        return max(s * self.radial.support_right if s > 0 else 0.0 for s in self.scales)

    def _log_tail(self, x):
        acc = np.full(x.shape, -np.inf)
        for s, w in zip(self.scales, self.weights):
            if w <= 0:
                continue
            term = self.radial.log_tail(x / s) if s > 0 else np.where(x < 0, 0.0, -np.inf)
            acc = np.logaddexp(acc, math.log(w) + term)
        return acc

    def sample(self, stream, n):
        cum = np.cumsum(self.weights)
        idx = np.minimum(np.searchsorted(cum, stream.uniform(n), side="right"), len(cum) - 1)
        return np.asarray(self.scales)[idx] * self.radial.sample(stream, n)

    def to_dict(self):
        return {
            "family": "scaled_mixture",
            "radial": self.radial.to_dict(),
            "scales": list(self.scales),
            "weights": list(self.weights),
        }


dc.register_family(
    "scaled_mixture",
    {"radial", "scales", "weights"},
    lambda s: ScaledMixture(dc.from_dict(s["radial"]), tuple(map(float, s["scales"])), tuple(map(float, s["weights"]))),
)


# ---------------------------------------------------------------------------
# vector models


@dataclass
class JointTail:
    value: np.ndarray
    stderr: np.ndarray
    hits: np.ndarray | None = None  # Monte Carlo exceedance counts


def _check_t(t, dim: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape != (dim,):
        raise DomainError(f"t must have length {dim}")
    if np.any(~(t > 0)):
        raise DomainError("t coordinates must be positive (inf drops a component)")
    if np.all(np.isinf(t)):
        raise DomainError("t = (inf, ..., inf) is excluded")
    return t


class VectorModel:
    """Base class for n-dimensional random vectors with joint tails.

    Subclasses set ``analytic`` and implement ``_log_joint`` (closed form) or
    ``_draws`` (Monte Carlo), plus ``marginals`` and ``to_dict``.
    """

    analytic: bool = True
    kind: str = "vector"
    mc_samples: int = DEFAULT_MC
    mc_seed: int = 0

    @property
    def dim(self) -> int:
        return len(self.marginals)

    @property
    def marginals(self) -> list[TailModel]:
        raise NotImplementedError

    @property
    def kernel_candidate(self) -> TailModel:
        return self.marginals[0]

    @property
    def non_negative(self) -> bool:
        return all(m.non_negative for m in self.marginals)

    @property
    def identical_components(self) -> bool:
        first = self.marginals[0].to_dict()
        return all(m.to_dict() == first for m in self.marginals[1:])

    @property
    def is_zero(self) -> bool:
        return all(isinstance(m, PointMass) and m.c == 0 for m in self.marginals)

    def _log_joint(self, t: np.ndarray, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, stream: RngStream, m: int) -> np.ndarray:
        """``m`` draws of the vector, shape (m, dim)."""
        raise NotImplementedError

    def _draws(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Cached (rows, row weights, number of paths) for Monte Carlo tails."""
        cache = self.__dict__.get("_draw_cache")
        if cache is None:
            rows = self.sample(RngStream(self.mc_seed, 0), self.mc_samples)
            cache = (rows, np.full(rows.shape[0], 1.0 / rows.shape[0]), rows.shape[0])
            self.__dict__["_draw_cache"] = cache
        return cache

    # -- joint tails -------------------------------------------------------
    def _z(self, t: np.ndarray) -> np.ndarray:
        rows, _, _ = self._draws()
        keep = np.isfinite(t)
        return np.min(rows[:, keep] / t[keep], axis=1)

    def _mc_tail(self, z: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        _, w, _ = self._draws()
        order = np.argsort(xs)
        grid = xs[order]
        idx = np.searchsorted(grid, z, side="left")
        wsum = np.bincount(idx, weights=w, minlength=grid.size + 1)
        hits = np.bincount(idx, minlength=grid.size + 1)
        p = np.empty(xs.size)
        h = np.empty(xs.size, dtype=np.int64)
        p[order] = np.cumsum(wsum[::-1])[::-1][1:]
        h[order] = np.cumsum(hits[::-1])[::-1][1:]
        return p, h

    def joint_tail(self, t, x) -> JointTail:
        t = _check_t(t, self.dim)
        xs, scalar = dc._as_array(x)
        if self.analytic:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = np.exp(np.minimum(self._log_joint(t, xs), 0.0))
            out = JointTail(val, np.zeros_like(val))
        else:
            p, h = self._mc_tail(self._z(t), xs.ravel())
            n_paths = self._draws()[2]
            se = np.sqrt(p * (1 - p) / n_paths)
            out = JointTail(p.reshape(xs.shape), se.reshape(xs.shape), h.reshape(xs.shape))
        if scalar:
            return JointTail(
                float(out.value.ravel()[0]),
                float(out.stderr.ravel()[0]),
                None if out.hits is None else int(out.hits.ravel()[0]),
            )
        return out

    def log_joint_tail(self, t, xs) -> np.ndarray:
        t = _check_t(t, self.dim)
        xs = np.asarray(xs, dtype=float)
        if self.analytic:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return np.minimum(self._log_joint(t, xs), 0.0)
        with np.errstate(divide="ignore"):
            return np.log(self.joint_tail(t, xs).value)

    def joint_ratio(self, t_num, t_den, xs, label: str) -> tuple[RatioCurve, tuple | None]:
        """Curve of joint_tail(t_num, x) / joint_tail(t_den, x), plus Monte Carlo
        hit counts (numerator, denominator) when simulated."""
        t_num = _check_t(t_num, self.dim)
        t_den = _check_t(t_den, self.dim)
        xs = np.asarray(xs, dtype=float)
        if self.analytic:
            lr = self.log_joint_tail(t_num, xs) - self.log_joint_tail(t_den, xs)
            return make_curve(label, xs, lr), None
        z_num, z_den = self._z(t_num), self._z(t_den)
        p_num, h_num = self._mc_tail(z_num, xs)
        p_den, h_den = self._mc_tail(z_den, xs)
        _, h_both = self._mc_tail(np.minimum(z_num, z_den), xs)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(p_num) - np.log(p_den)
            var_log = 1.0 / h_num + 1.0 / h_den - 2.0 * h_both / (h_num * h_den)
            se = np.exp(lr) * np.sqrt(np.maximum(var_log, 0.0))
        se = np.where(np.isfinite(se), se, 0.0)
        return make_curve(label, xs, lr, se), (h_num, h_den)

    def default_xs(self, grid: GridSpec | None = None, lo_scale: float = 1.0, hi_scale: float = 1.0) -> np.ndarray:
        """x grid for ratio curves.

        Analytic models use the univariate grid of the kernel candidate. Monte
        Carlo models use quantiles of min_i X_i: the most scaled-down level
        ``lo_scale * x`` stays above the 90th percentile and the most
        scaled-up level ``hi_scale * x`` keeps about 500 hits.
        """
        if self.analytic:
            return (grid or GridSpec()).xs(self.kernel_candidate)
        rows, w, n_paths = self._draws()
        z = np.min(rows, axis=1)
        order = np.argsort(z)
        cum = np.cumsum(w[order])
        top = max(1e-5, 500.0 / n_paths)
        q_lo, q_hi = z[order][np.searchsorted(cum, [0.9 * cum[-1], (1.0 - top) * cum[-1]])]
        lo, hi = q_lo / lo_scale, q_hi / hi_scale
        if not (lo > 0 and hi > lo):
            raise DomainError("Monte Carlo joint tail has no usable range for this grid")
        return np.geomspace(lo, hi, 41)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(eq=False)
class IndependentComponents(VectorModel):
    components: tuple[TailModel, ...]
    kind = "independent"

    def __post_init__(self):
        if len(self.components) < 2:
            raise DomainError("vectors need dimension >= 2")

    @property
    def marginals(self):
        return list(self.components)

    def _log_joint(self, t, xs):
        acc = np.zeros(xs.shape)
        for ti, m in zip(t, self.components):
            if math.isfinite(ti):
                acc = acc + m.log_tail(ti * xs)
        return acc

    def sample(self, stream, m):
        return np.column_stack([c.sample(stream, m) for c in self.components])

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "independent"}, "marginals": [c.to_dict() for c in self.components]}


@dataclass(eq=False)
class RadialJoint(VectorModel):
    """X = R * D with D drawn from finitely many directions (pmf) independent of R.

    The joint tail is sum_d p_d Rbar(max_i t_i x / D_di); a zero coordinate
    never exceeds a positive level.
    """

    radial: TailModel
    directions: tuple[tuple[float, ...], ...]
    pmf: tuple[float, ...]
    kind = "radial"

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.ndim != 2 or d.shape[1] < 2:
            raise DomainError("directions must be a (k, n >= 2) array")
        if d.shape[0] != len(self.pmf) or abs(sum(self.pmf) - 1.0) > 1e-12 or min(self.pmf) < 0:
            raise DomainError("direction pmf must match directions and sum to one")
        if np.any(d < 0):
            raise DomainError("directions must be non-negative")
        if not self.radial.non_negative:
            raise DomainError("the radial factor must be non-negative")

    @cached_property
    def _dir(self) -> np.ndarray:
        return np.asarray(self.directions, dtype=float)

    @cached_property
    def marginals(self):
        out = []
        for i in range(self._dir.shape[1]):
            scales = tuple(float(s) for s in self._dir[:, i])
            if len(scales) == 1 and scales[0] == 1.0:
                out.append(self.radial)
            else:
                out.append(ScaledMixture(self.radial, scales, tuple(self.pmf)))
        return out

    def _log_joint(self, t, xs):
        keep = np.isfinite(t)
        acc = np.full(xs.shape, -np.inf)
        for d, p in zip(self._dir, self.pmf):
            if p <= 0:
                continue
            if np.any(d[keep] == 0):
                # a zero coordinate exceeds only negative levels
                term = np.where(xs < 0, 0.0, -np.inf) if np.all(d[keep] == 0) else np.full(xs.shape, -np.inf)
            else:
                level = np.max(t[keep] / d[keep]) * xs
                term = self.radial.log_tail(level)
            acc = np.logaddexp(acc, math.log(p) + term)
        return acc

    def sample(self, stream, m):
        cum = np.cumsum(self.pmf)
        idx = np.minimum(np.searchsorted(cum, stream.uniform(m), side="right"), len(cum) - 1)
        return self.radial.sample(stream, m)[:, None] * self._dir[idx]

    def to_dict(self):
        return {
            "dim": self.dim,
            "joint": {
                "kind": "radial",
                "R": self.radial.to_dict(),
                "directions": [list(d) for d in self.directions],
                "pmf": list(self.pmf),
            },
        }


def common_factor(radial: TailModel, weights) -> RadialJoint:
    """X_i = weight_i * R; the joint tail is Rbar(max_i t_i x / weight_i)."""
    w = tuple(float(v) for v in weights)
    if any(v <= 0 for v in w):
        raise DomainError("common-factor weights must be positive")
    model = RadialJoint(radial, (w,), (1.0,))
    model.kind = "common_factor"
    return model


def mrv_model(alpha: float, directions, pmf, r_scale: float = 1.0) -> RadialJoint:
    """Pareto(alpha, r_scale) radius times a direction drawn from a finite angular pmf."""
    model = RadialJoint(
        Pareto(alpha, r_scale), tuple(tuple(float(v) for v in d) for d in directions), tuple(float(p) for p in pmf)
    )
    model.kind = "mrv"
    return model


@dataclass(eq=False)
class FgmPair(VectorModel):
    """Two components coupled by the FGM copula.

    P[X_1 > a, X_2 > b] = F1bar(a) F2bar(b) (1 + theta F1(a) F2(b)).
    """

    first: TailModel
    second: TailModel
    theta: float
    kind = "fgm_pair"

    def __post_init__(self):
        if not -1 <= self.theta <= 1:
            raise DomainError("FGM theta must lie in [-1, 1]")
        if not self.second.continuous:
            raise DomainError("FGM pair needs a continuous second component")

    @property
    def marginals(self):
        return [self.first, self.second]

    def _log_joint(self, t, xs):
        if not math.isfinite(t[1]):
            return self.first.log_tail(t[0] * xs)
        if not math.isfinite(t[0]):
            return self.second.log_tail(t[1] * xs)
        la = self.first.log_tail(t[0] * xs)
        lb = self.second.log_tail(t[1] * xs)
        return la + lb + np.log1p(self.theta * (-np.expm1(la)) * (-np.expm1(lb)))

    def sample(self, stream, m):
        a, b = sample_pair(DependenceKernel("fgm", self.theta), self.first, self.second, stream, m)
        return np.column_stack([a, b])

    def to_dict(self):
        return {
            "dim": 2,
            "joint": {"kind": "fgm_pair", "theta": self.theta},
            "marginals": [self.first.to_dict(), self.second.to_dict()],
        }


@dataclass(eq=False)
class IndependentScalarProduct(VectorModel):
    """Y * X for independent components X_i and an independent weight Y.

    The joint tail integrates prod_i Fbar_i(t_i x / y) against G in the grade of Y.
    """

    base: IndependentComponents
    weight: TailModel
    kind = "scalar_product"

    @cached_property
    def marginals(self):
        return [ProductModel(m, self.weight) for m in self.base.components]

    def _log_joint(self, t, xs):
        flat = xs.ravel()

        def log_phi(y, om2v, rows):
            lx = flat[rows][:, None, None]
            with np.errstate(divide="ignore"):
                z = lx / y
            acc = np.zeros(np.broadcast_shapes(z.shape, y.shape))
            for ti, m in zip(t, self.base.components):
                if math.isfinite(ti):
                    acc = acc + m.log_tail(ti * z)
            return acc

        hint = self.dim * np.asarray(self.marginals[0].log_tail(flat)) - 40.0
        return grade_integral(self.weight, log_phi, flat.size, x_hint=hint).reshape(xs.shape)

    def sample(self, stream, m):
        x = self.base.sample(stream, m)
        return x * self.weight.sample(stream, m)[:, None]

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "scalar_product", "base": self.base.to_dict(), "y": self.weight.to_dict()}}


@dataclass(eq=False)
class SampledScalarProduct(VectorModel):
    base: VectorModel
    weight: TailModel
    mc_samples: int = DEFAULT_MC
    mc_seed: int = 0
    analytic = False
    kind = "scalar_product"

    @cached_property
    def marginals(self):
        return [ProductModel(m, self.weight) for m in self.base.marginals]

    def sample(self, stream, m):
        return self.base.sample(stream, m) * self.weight.sample(stream, m)[:, None]

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "scalar_product", "base": self.base.to_dict(), "y": self.weight.to_dict()}}


@dataclass(eq=False)
class VectorSum(VectorModel):
    """X + Y for independent vectors; Monte Carlo unless one side is zero."""

    left: VectorModel
    right: VectorModel
    mc_samples: int = DEFAULT_MC
    mc_seed: int = 0
    kind = "sum"

    def __post_init__(self):
        if self.left.dim != self.right.dim:
            raise DomainError("vector sum needs equal dimensions")
        if not (self.left.non_negative and self.right.non_negative):
            raise DomainError("vector sums are defined for non-negative vectors")

    @property
    def analytic(self):
        return self._passthrough is not None and self._passthrough.analytic

    @property
    def _passthrough(self) -> VectorModel | None:
        if self.right.is_zero:
            return self.left
        if self.left.is_zero:
            return self.right
        return None

    @cached_property
    def marginals(self):
        if self._passthrough is not None:
            return self._passthrough.marginals
        return [IndependentSum(a, b) for a, b in zip(self.left.marginals, self.right.marginals)]

    @property
    def kernel_candidate(self):
        if self._passthrough is not None:
            return self._passthrough.kernel_candidate
        return IndependentSum(self.left.kernel_candidate, self.right.kernel_candidate)

    def _log_joint(self, t, xs):
        return self._passthrough._log_joint(t, xs)

    def joint_tail(self, t, x):
        if self._passthrough is not None:
            return self._passthrough.joint_tail(t, x)
        return super().joint_tail(t, x)

    def sample(self, stream, m):
        return self.left.sample(stream.spawn(0), m) + self.right.sample(stream.spawn(1), m)

    def sandwich(self, t, xs) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper bounds on the joint tail of the sum.

        Each component exceedance X_i + Y_i > t_i x needs X_i or Y_i above
        t_i x / 2, and is implied by either alone above t_i x. Summing over the
        2^n ways to assign components to X or Y gives the upper bound at half
        scale and, divided by 2^n, the lower bound at full scale.
        """
        t = _check_t(t, self.dim)
        xs = np.asarray(xs, dtype=float)
        active = [i for i in range(self.dim) if math.isfinite(t[i])]
        lower = np.zeros(xs.shape)
        upper = np.zeros(xs.shape)
        for mask in itertools.product((0, 1), repeat=len(active)):
            t_left = np.full(self.dim, INF)
            t_right = np.full(self.dim, INF)
            for i, side in zip(active, mask):
                (t_left if side == 0 else t_right)[i] = t[i]
            upper += _tail_or_one(self.left, t_left / 2, xs) * _tail_or_one(self.right, t_right / 2, xs)
            lower += _tail_or_one(self.left, t_left, xs) * _tail_or_one(self.right, t_right, xs)
        return lower / 2 ** len(active), upper

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "sum", "left": self.left.to_dict(), "right": self.right.to_dict()}}


def _tail_or_one(model: VectorModel, t: np.ndarray, xs: np.ndarray) -> np.ndarray:
    if np.all(np.isinf(t)):
        return np.ones(xs.shape)
    return np.asarray(model.joint_tail(t, xs).value)


@dataclass(eq=False)
class StoppedVectorSum(VectorModel):
    """Sum of N i.i.d. copies of a non-negative vector, N independent.

    Monte Carlo rows are the partial sums S_1, ..., S_nmax of shared paths,
    weighted by P[N = d]; counts with pmf below ``min_weight`` are skipped.
    """

    base: VectorModel
    stopping: StoppingTime
    mc_samples: int = DEFAULT_MC
    mc_seed: int = 0
    min_weight: float = 1e-12
    analytic = False
    kind = "stopped_sum"

    def __post_init__(self):
        if not self.base.non_negative:
            raise DomainError("stopped sums need non-negative summands")
        if self.stopping.truncation_error > 1e-6:
            raise DomainError("stopping-time truncation error exceeds 1e-6")

    @cached_property
    def marginals(self):
        return [StoppedSum(m, self.stopping) for m in self.base.marginals]

    @property
    def kernel_candidate(self):
        return StoppedSum(self.base.kernel_candidate, self.stopping)

    def _draws(self):
        cache = self.__dict__.get("_draw_cache")
        if cache is not None:
            return cache
        stream = RngStream(self.mc_seed, 0)
        m = self.mc_samples
        pmf = {d: p for d, p in self.stopping.pmf if p >= self.min_weight}
        n_max = max(pmf)
        rows, weights = [], []
        acc = np.zeros((m, self.dim))
        if 0 in pmf:
            rows.append(acc.copy())
            weights.append(np.full(m, pmf[0] / m))
        for d in range(1, n_max + 1):
            acc += self.base.sample(stream, m)
            if d in pmf:
                rows.append(acc.copy())
                weights.append(np.full(m, pmf[d] / m))
        cache = (np.concatenate(rows), np.concatenate(weights), m)
        self.__dict__["_draw_cache"] = cache
        return cache

    def sample(self, stream, m):
        counts = self.stopping.sample(stream, m)
        out = np.zeros((m, self.dim))
        for d in range(1, int(counts.max()) + 1):
            active = counts >= d
            out[active] += self.base.sample(stream, int(active.sum()))
        return out

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "stopped_sum", "base": self.base.to_dict(), "stopping": self.stopping.to_dict()}}


@dataclass(eq=False)
class VectorMixture(VectorModel):
    """With probability p the first vector, else the second."""

    p: float
    left: VectorModel
    right: VectorModel
    mc_samples: int = DEFAULT_MC
    mc_seed: int = 0
    kind = "mixture"

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError("mixture weight must lie in (0, 1)")
        if self.left.dim != self.right.dim:
            raise DomainError("mixture needs equal dimensions")

    @property
    def analytic(self):
        return self.left.analytic and self.right.analytic

    @cached_property
    def marginals(self):
        return [Mixture(self.p, a, b) for a, b in zip(self.left.marginals, self.right.marginals)]

    @property
    def kernel_candidate(self):
        return Mixture(self.p, self.left.kernel_candidate, self.right.kernel_candidate)

    def _log_joint(self, t, xs):
        return np.logaddexp(
            math.log(self.p) + self.left.log_joint_tail(t, xs),
            math.log1p(-self.p) + self.right.log_joint_tail(t, xs),
        )

    def joint_tail(self, t, x):
        if self.analytic:
            return super().joint_tail(t, x)
        a = self.left.joint_tail(t, x)
        b = self.right.joint_tail(t, x)
        q = 1.0 - self.p
        return JointTail(
            self.p * np.asarray(a.value) + q * np.asarray(b.value),
            np.hypot(self.p * np.asarray(a.stderr), q * np.asarray(b.stderr)),
        )

    def sample(self, stream, m):
        pick = stream.uniform(m) < self.p
        return np.where(pick[:, None], self.left.sample(stream, m), self.right.sample(stream, m))

    def to_dict(self):
        return {
            "dim": self.dim,
            "joint": {"kind": "mixture", "p": self.p, "left": self.left.to_dict(), "right": self.right.to_dict()},
        }


@dataclass(eq=False)
class ProjectedVector(VectorModel):
    """The sub-vector that remains after dropping one component."""

    base: VectorModel
    drop: int
    kind = "projection"

    @property
    def analytic(self):
        return self.base.analytic

    @property
    def marginals(self):
        return [m for i, m in enumerate(self.base.marginals) if i != self.drop]

    def _full_t(self, t):
        return np.insert(np.asarray(t, dtype=float), self.drop, INF)

    def _log_joint(self, t, xs):
        return self.base._log_joint(self._full_t(t), xs)

    def joint_tail(self, t, x):
        _check_t(t, self.dim)
        return self.base.joint_tail(self._full_t(t), x)

    def _draws(self):
        rows, w, m = self.base._draws()
        return np.delete(rows, self.drop, axis=1), w, m

    def sample(self, stream, m):
        return np.delete(self.base.sample(stream, m), self.drop, axis=1)

    def to_dict(self):
        return {"dim": self.dim, "joint": {"kind": "projection", "base": self.base.to_dict(), "drop": self.drop}}


# ---------------------------------------------------------------------------
# constructions


def scalar_product(model: VectorModel, y: TailModel, kernel: DependenceKernel = INDEPENDENT) -> VectorModel:
    """The vector Y * X.

    Radial models stay exact (the product acts on the radius, so the kernel
    couples Y with R); independent components are integrated against G;
    anything else is simulated.
    """
    if y.support_left < 0 or float(y.cdf(0.0)) >= 1.0:
        raise DomainError("the scalar weight must be non-negative and not degenerate at 0")
    if isinstance(model, RadialJoint):
        out = RadialJoint(ProductModel(model.radial, y, kernel), model.directions, model.pmf)
        out.kind = model.kind
        return out
    if not kernel.is_independent:
        raise DomainError("dependence with the scalar weight is supported for radial models only")
    if isinstance(model, IndependentComponents):
        return IndependentScalarProduct(model, y)
    return SampledScalarProduct(model, y, model.mc_samples, model.mc_seed)


def vector_sum(m1: VectorModel, m2: VectorModel) -> VectorSum:
    return VectorSum(m1, m2, max(m1.mc_samples, m2.mc_samples), m1.mc_seed)


def stopped_vector_sum(m: VectorModel, stopping: StoppingTime) -> StoppedVectorSum:
    return StoppedVectorSum(m, stopping, m.mc_samples, m.mc_seed)


def vector_mixture(m1: VectorModel, m2: VectorModel, p: float) -> VectorMixture:
    return VectorMixture(float(p), m1, m2, max(m1.mc_samples, m2.mc_samples), m1.mc_seed)


def zero_vector(dim: int) -> IndependentComponents:
    return IndependentComponents(tuple(PointMass(0.0) for _ in range(dim)))


def project(model: VectorModel, drop: int) -> VectorModel | TailModel:
    """Drop component ``drop``; a 2-vector projects to its other marginal."""
    if not 0 <= drop < model.dim:
        raise DomainError("projection index out of range")
    if model.dim == 2:
        return model.marginals[1 - drop]
    return ProjectedVector(model, drop)


def joint_tail(model: VectorModel, t, x) -> JointTail:
    return model.joint_tail(t, x)


# ---------------------------------------------------------------------------
# class checks


def default_t_grid(dim: int) -> list[tuple[float, ...]]:
    grid = [(1.0,) * dim, (0.5,) * dim, (2.0,) * dim, (0.5,) + (2.0,) * (dim - 1), (2.0,) + (0.5,) * (dim - 1)]
    for i in range(dim):
        t = [INF] * dim
        t[i] = 1.0
        grid.append(tuple(t))
    return grid


def default_t_grid_mc(dim: int) -> list[tuple[float, ...]]:
    """Simulated joint tails thin out fast away from t = 1, so stay close to it."""
    grid = [(1.0,) * dim, (0.8,) + (1.0,) * (dim - 1)]
    for i in range(dim):
        t = [INF] * dim
        t[i] = 1.0
        grid.append(tuple(t))
    return grid


def _unit(dim: int, i: int) -> tuple[float, ...]:
    t = [INF] * dim
    t[i] = 1.0
    return tuple(t)


def _scales(pairs) -> tuple[float, float]:
    """Smallest and largest binding level factor max_i t_i over evaluated t vectors."""
    levels = [max(a for a in t if math.isfinite(a)) for t in pairs]
    return min(levels), max(levels)


def default_b_grid(dim: int) -> list[tuple[float, ...]]:
    return list(itertools.product((0.5, 0.8), repeat=dim))


def default_v_grid(dim: int) -> list[tuple[float, ...]]:
    return list(itertools.product((1.5, 2.0), repeat=dim))


def _fmt(v) -> str:
    return "(" + ",".join("inf" if math.isinf(a) else f"{a:g}" for a in v) + ")"


@dataclass
class KernelEquivalence:
    kernel_candidate: TailModel
    ratios: list[RatioCurve]
    mode: str  # weak | strong
    verdict: str
    constants: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel_candidate.to_dict(),
            "mode": self.mode,
            "verdict": self.verdict,
            "constants": [_num(c) for c in self.constants],
            "curves": [c.to_dict() for c in self.ratios],
        }


def _inverse(c: RatioCurve) -> RatioCurve:
    return make_curve(c.label + "^-1", c.xs, -c.log_values)


def weak_equivalence_verdict(c: RatioCurve, tol: Tolerances) -> str:
    """Both the ratio and its reciprocal stay bounded."""
    if not (c.top_min > 0 and math.isfinite(c.top_max)):
        return FAILS
    return combine([_bounded_verdict(c, tol), _bounded_verdict(_inverse(c), tol)])


def kernel_equivalence(
    marginals, kernel: TailModel, mode: str = "weak", grid: GridSpec | None = None, tol: Tolerances | None = None
) -> KernelEquivalence:
    """Compare every marginal tail with the candidate kernel tail."""
    if mode not in ("weak", "strong"):
        raise DomainError("mode must be 'weak' or 'strong'")
    tol = tol or Tolerances()
    xs = (grid or GridSpec()).xs(kernel)
    lk = np.asarray(kernel.log_tail(xs))
    curves, verdicts, consts = [], [], []
    for i, m in enumerate(marginals):
        with np.errstate(invalid="ignore"):
            c = make_curve(f"marginal_{i}_over_kernel", xs, np.asarray(m.log_tail(xs)) - lk)
        curves.append(c)
        consts.append(c.limit_estimate)
        v = weak_equivalence_verdict(c, tol)
        if mode == "strong" and v == HOLDS:
            stable = c.top_max - c.top_min <= tol.limit_tol * c.limit_estimate
            if not (is_flat(c, tol) and stable):
                v = FAILS if (is_rising(c, tol) or is_falling(c, tol)) else INCONCLUSIVE
        verdicts.append(v)
    return KernelEquivalence(kernel, curves, mode, combine(verdicts), consts)


def _mc_kernel_equivalence(model: VectorModel, xs, mode: str, tol: Tolerances) -> KernelEquivalence:
    """Marginal-over-first-marginal ratios estimated from the shared draws."""
    curves, verdicts, consts = [], [], []
    for i in range(model.dim):
        c, hits = model.joint_ratio(_unit(model.dim, i), _unit(model.dim, 0), xs, f"marginal_{i}_over_kernel")
        curves.append(c)
        consts.append(c.limit_estimate)
        if not _hit_floor_ok(c, np.minimum(*hits), tol):
            verdicts.append(INCONCLUSIVE)
            continue
        v = weak_equivalence_verdict(c, tol)
        if mode == "strong" and v == HOLDS:
            band = max(tol.limit_tol * c.limit_estimate, 3.0 * float(np.max(c.stderr[c.top])))
            if not (is_flat(c, tol) and c.top_max - c.top_min <= 2 * band):
                v = INCONCLUSIVE
        verdicts.append(v)
    return KernelEquivalence(model.marginals[0], curves, mode, combine(verdicts), consts)


def _hit_floor_ok(curve: RatioCurve, hits: np.ndarray | None, tol: Tolerances) -> bool:
    return hits is None or bool(np.all(np.asarray(hits)[curve.top] >= tol.min_hits))


def check_Dn(
    model: VectorModel,
    t_grid=None,
    b_grid=None,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> ClassVerdict:
    """Joint scale-down ratios bounded, every marginal in D, and a weak kernel."""
    tol = tol or Tolerances()
    default_t = default_t_grid if model.analytic else default_t_grid_mc
    t_grid = [tuple(t) for t in (t_grid or default_t(model.dim))]
    b_grid = [tuple(b) for b in (b_grid or default_b_grid(model.dim))]
    for b in b_grid:
        if len(b) != model.dim or not all(0 < v < 1 for v in b):
            raise DomainError("each b must lie in (0, 1)^n")
    scaled = [tuple(np.asarray(t) * np.asarray(b)) for t in t_grid for b in b_grid]
    lo_scale, _ = _scales(scaled)
    _, hi_scale = _scales(t_grid)
    xs = model.default_xs(grid, lo_scale, hi_scale)
    curves, per_curve = [], {}
    for t in t_grid:
        for b in b_grid:
            tn = np.asarray(t) * np.asarray(b)
            label = f"joint_ratio(t={_fmt(t)},b={_fmt(b)})"
            c, hits = model.joint_ratio(tn, t, xs, label)
            floor = None if hits is None else np.minimum(*hits)
            v = _bounded_verdict(c, tol) if _hit_floor_ok(c, floor, tol) else INCONCLUSIVE
            curves.append(c)
            per_curve[label] = v
    if model.analytic:
        marg_verdicts = [check_class(m, "D", grid, tol).verdict for m in model.marginals]
        weak = kernel_equivalence(model.marginals, model.kernel_candidate, "weak", grid, tol)
    else:
        # the unit-t curves are the marginal scale-down ratios
        marg_verdicts = [
            combine(per_curve[f"joint_ratio(t={_fmt(_unit(model.dim, i))},b={_fmt(b)})"] for b in b_grid)
            if _unit(model.dim, i) in t_grid
            else INCONCLUSIVE
            for i in range(model.dim)
        ]
        weak = _mc_kernel_equivalence(model, xs, "weak", tol)
    verdict = combine(list(per_curve.values()) + marg_verdicts + [weak.verdict])
    return ClassVerdict(
        "Dn",
        verdict,
        curves,
        {
            "t_grid": [_fmt(t) for t in t_grid],
            "b_grid": [_fmt(b) for b in b_grid],
            "curve_verdicts": per_curve,
            "marginal_D": marg_verdicts,
            "kernel": weak.to_dict(),
        },
    )


def check_PDn(
    model: VectorModel,
    t_grid=None,
    v_grid=None,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> ClassVerdict:
    """Joint scale-up ratios limited below one, and a strong kernel.

    Scale factors within ``pd_margin`` of one cannot separate a limit below
    one from one itself; such curves are at best inconclusive.
    """
    tol = tol or Tolerances()
    default_t = default_t_grid if model.analytic else default_t_grid_mc
    t_grid = [tuple(t) for t in (t_grid or default_t(model.dim))]
    v_grid = [tuple(v) for v in (v_grid or default_v_grid(model.dim))]
    for v in v_grid:
        if len(v) != model.dim or not all(a > 1 for a in v):
            raise DomainError("each v must exceed 1 componentwise")
    lo_scale, hi_scale = _scales(t_grid)
    xs = model.default_xs(grid, lo_scale, hi_scale)
    curves, per_curve = [], {}
    for t in t_grid:
        for v in v_grid:
            label = f"joint_ratio(t={_fmt(t)},v={_fmt(v)})"
            c, hits = model.joint_ratio(np.asarray(t) * np.asarray(v), t, xs, label)
            near_one = min(v) - 1.0 < tol.pd_margin
            upper = c.top_max + 3.0 * float(np.max(c.stderr[c.top]))
            if hits is not None and not _hit_floor_ok(c, hits[1], tol):
                verdict = INCONCLUSIVE
            elif upper < 1 - tol.pd_margin:
                verdict = HOLDS
            elif (is_flat(c, tol) or is_rising(c, tol)) and not near_one:
                verdict = FAILS
            else:
                verdict = INCONCLUSIVE
            curves.append(c)
            per_curve[label] = verdict
    if model.analytic:
        strong = kernel_equivalence(model.marginals, model.kernel_candidate, "strong", grid, tol)
    else:
        strong = _mc_kernel_equivalence(model, xs, "strong", tol)
    verdict = combine(list(per_curve.values()) + [strong.verdict])
    return ClassVerdict(
        "PDn",
        verdict,
        curves,
        {
            "t_grid": [_fmt(t) for t in t_grid],
            "v_grid": [_fmt(v) for v in v_grid],
            "curve_verdicts": per_curve,
            "kernel": strong.to_dict(),
        },
    )


# ---------------------------------------------------------------------------
# MRV and linear combinations


@dataclass
class MrvReport:
    applicable: bool
    in_Dn: ClassVerdict | None
    in_PDn: ClassVerdict | None
    homogeneity: RatioCurve | None
    bound: float
    homogeneity_ok: bool
    confirmed: bool | str

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "Dn": self.in_Dn.to_dict() if self.in_Dn else None,
            "PDn": self.in_PDn.to_dict() if self.in_PDn else None,
            "homogeneity": self.homogeneity.to_dict() if self.homogeneity else None,
            "bound": _num(self.bound),
            "homogeneity_ok": self.homogeneity_ok,
            "confirmed": self.confirmed,
        }


def check_mrv_in_Dn(
    model: RadialJoint,
    b=(0.5, 0.5),
    t=None,
    with_pdn: bool = False,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> MrvReport:
    """Run check_Dn on a spectral model and probe joint(b t, x) / joint(t, x) <= min(b)^-alpha."""
    if not isinstance(model, RadialJoint) or not isinstance(model.radial, Pareto):
        raise DomainError("MRV checks need a Pareto-radius spectral model")
    tol = tol or Tolerances()
    d = np.asarray(model.directions)
    positive = any(p > 0 and np.all(row > 0) for row, p in zip(d, model.pmf))
    if not positive:
        return MrvReport(False, None, None, None, math.nan, False, "not-applicable")
    t = np.ones(model.dim) if t is None else np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    xs = model.default_xs(grid)
    curve, _ = model.joint_ratio(b * t, t, xs, f"homogeneity(b={_fmt(b)})")
    bound = float(np.min(b) ** (-model.radial.alpha))
    ok = bool(curve.top_max <= bound * (1 + tol.limit_tol))
    dn = check_Dn(model, grid=grid, tol=tol)
    pdn = check_PDn(model, grid=grid, tol=tol) if with_pdn else None
    confirmed = dn.holds and ok and (pdn is None or pdn.holds)
    return MrvReport(True, dn, pdn, curve, bound, ok, confirmed)


def linear_combination(model: VectorModel, weights) -> TailModel:
    """Law of sum_i l_i X_i for non-negative l, where a closed form exists."""
    l = np.asarray(weights, dtype=float)
    if l.shape != (model.dim,) or np.any(l < 0) or not np.any(l > 0):
        raise DomainError("linear-combination weights must be non-negative and not all zero")
    if isinstance(model, RadialJoint):
        scales = tuple(float(s) for s in np.asarray(model.directions) @ l)
        return ScaledMixture(model.radial, scales, tuple(model.pmf))
    if isinstance(model, IndependentComponents):
        terms = [ScaledMixture(m, (float(c),), (1.0,)) for m, c in zip(model.components, l) if c > 0]
        out = terms[0]
        for t in terms[1:]:
            out = IndependentSum(out, t)
        return out
    raise DomainError("no closed form for this linear combination")


def check_linear_combination(
    model: VectorModel, weights=(1.0, 2.0), b: float = 0.5, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> ClassVerdict:
    """Scale-down ratio of l . X bounded (class D of the combination at factor b)."""
    tol = replace(tol or Tolerances(), d_b=b)
    v = check_class(linear_combination(model, weights), "D", grid, tol)
    v.parameters["weights"] = list(map(float, weights))
    return v


# ---------------------------------------------------------------------------
# closure reports


def vector_assumption(
    product: VectorModel, y: TailModel, t_grid=None, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> dict:
    """Gbar(a(x)) / Hbar(t, x) -> 0 with a(x) = x / ln x, for every t."""
    tol = tol or Tolerances()
    t_grid = t_grid or default_t_grid(product.dim)
    xs = product.default_xs(grid)
    verdicts = {}
    for t in t_grid:
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.asarray(y.log_tail(xs / np.log(xs))) - product.log_joint_tail(t, xs)
        c = make_curve(f"assumption(t={_fmt(t)})", xs, lr)
        top = c.log_values[c.top]
        if np.all(np.isneginf(top)) or (c.top_max < tol.m_threshold and is_falling(c, tol)):
            verdicts[_fmt(t)] = HOLDS
        elif is_flat(c, tol) or is_rising(c, tol):
            verdicts[_fmt(t)] = FAILS
        else:
            verdicts[_fmt(t)] = INCONCLUSIVE
    return {"pass": all(v == HOLDS for v in verdicts.values()), "verdicts": verdicts}


def _vector_finish(theorem: str, pre: dict, conclusion_fn) -> ClosureReport:
    if not all(v["pass"] for v in pre.values()):
        return ClosureReport(theorem, pre, None, "not-applicable")
    conclusion = conclusion_fn()
    flags = ["inconclusive_vs_theory"] if conclusion.verdict == FAILS else []
    return ClosureReport(theorem, pre, conclusion, conclusion.verdict == HOLDS, flags)


def verify_scalar_product_closure(
    model: VectorModel,
    y: TailModel,
    kernel: DependenceKernel = INDEPENDENT,
    target: str = "Dn",
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> ClosureReport:
    if target not in ("Dn", "PDn"):
        raise DomainError("scalar-product closure is checked for Dn and PDn")
    check = check_Dn if target == "Dn" else check_PDn
    pre: dict[str, dict] = {}
    base = check(model, grid=grid, tol=tol)
    pre["vector_in_class"] = {"pass": base.holds, "verdict": base.verdict}
    y_ok = y.support_left >= 0 and float(y.cdf(0.0)) < 1.0
    pre["weight_non_negative"] = {"pass": y_ok}
    if target == "PDn":
        pre["identical_components"] = {"pass": model.identical_components}
    if not all(v["pass"] for v in pre.values()):
        return ClosureReport(f"scalar_product:{target}", pre, None, "not-applicable")
    product = scalar_product(model, y, kernel)
    pre["assumption"] = vector_assumption(product, y, grid=grid, tol=tol)
    return _vector_finish(f"scalar_product:{target}", pre, lambda: check(product, grid=grid, tol=tol))


_SUM_SAFE = ("independent", "common_factor")


def verify_vector_sum_closure(
    m1: VectorModel, m2: VectorModel, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> ClosureReport:
    """Dn closure of independent sums, for constructions whose mixed vectors stay in Dn."""
    pre: dict[str, dict] = {}
    pre["non_negative"] = {"pass": m1.non_negative and m2.non_negative}
    pre["mixed_vectors"] = {
        "pass": m1.kind in _SUM_SAFE and m2.kind in _SUM_SAFE,
        "kinds": [m1.kind, m2.kind],
    }
    for name, m in (("first_in_Dn", m1), ("second_in_Dn", m2)):
        v = check_Dn(m, grid=grid, tol=tol)
        pre[name] = {"pass": v.holds, "verdict": v.verdict}
    if pre["first_in_Dn"]["pass"] and pre["second_in_Dn"]["pass"]:
        weak = kernel_equivalence(
            [m1.kernel_candidate], m2.kernel_candidate, "weak", grid, tol or Tolerances()
        )
        pre["weak_equivalent_kernels"] = {"pass": weak.verdict == HOLDS, "verdict": weak.verdict}
    return _vector_finish("vector_sum:Dn", pre, lambda: check_Dn(vector_sum(m1, m2), grid=grid, tol=tol))


def verify_stopped_sum_closure(
    m: VectorModel, stopping: StoppingTime, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> ClosureReport:
    pre: dict[str, dict] = {}
    pre["non_negative"] = {"pass": m.non_negative}
    pre["mixed_vectors"] = {"pass": m.kind in _SUM_SAFE, "kind": m.kind}
    pre["truncation"] = {"pass": stopping.truncation_error <= 1e-6, "error": stopping.truncation_error}
    v = check_Dn(m, grid=grid, tol=tol)
    pre["summand_in_Dn"] = {"pass": v.holds, "verdict": v.verdict}
    return _vector_finish(
        "stopped_sum:Dn", pre, lambda: check_Dn(stopped_vector_sum(m, stopping), grid=grid, tol=tol)
    )


def verify_vector_mixture_closure(
    m1: VectorModel, m2: VectorModel, p: float, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> ClosureReport:
    pre: dict[str, dict] = {}
    for name, m in (("first_in_Dn", m1), ("second_in_Dn", m2)):
        v = check_Dn(m, grid=grid, tol=tol)
        pre[name] = {"pass": v.holds, "verdict": v.verdict}
    return _vector_finish("mixture:Dn", pre, lambda: check_Dn(vector_mixture(m1, m2, p), grid=grid, tol=tol))


def verify_mrv_closure(model: RadialJoint, target: str = "Dn", grid=None, tol=None) -> ClosureReport:
    rep = check_mrv_in_Dn(model, with_pdn=(target == "PDn"), grid=grid, tol=tol)
    pre = {"positive_orthant_mass": {"pass": rep.applicable}}
    if not rep.applicable:
        return ClosureReport(f"mrv:{target}", pre, None, "not-applicable")
    pre["homogeneity"] = {"pass": rep.homogeneity_ok, "bound": rep.bound, "top_max": rep.homogeneity.top_max}
    if not rep.homogeneity_ok:
        return ClosureReport(f"mrv:{target}", pre, None, "not-applicable")
    conclusion = rep.in_PDn if target == "PDn" else rep.in_Dn
    flags = ["inconclusive_vs_theory"] if conclusion.verdict == FAILS else []
    return ClosureReport(f"mrv:{target}", pre, conclusion, conclusion.verdict == HOLDS, flags)


# ---------------------------------------------------------------------------
# JSON


def vector_from_dict(spec: dict) -> VectorModel:
    """Build a vector model from its JSON object; unknown keys are rejected."""
    if not isinstance(spec, dict):
        raise DomainError("vector spec must be an object")
    extra = set(spec) - {"dim", "joint", "marginals", "mc_samples", "mc_seed"}
    if extra:
        raise DomainError(f"unknown vector keys: {sorted(extra)}")
    joint = spec.get("joint")
    if not isinstance(joint, dict) or "kind" not in joint:
        raise DomainError("vector spec needs a joint object with a 'kind'")
    kind = joint["kind"]
    allowed = {
        "independent": {"kind"},
        "common_factor": {"kind", "R", "weights"},
        "fgm_pair": {"kind", "theta"},
        "mrv": {"kind", "alpha", "directions", "pmf", "r_scale"},
        "radial": {"kind", "R", "directions", "pmf"},
        "scalar_product": {"kind", "base", "y", "dependence"},
        "sum": {"kind", "left", "right"},
        "stopped_sum": {"kind", "base", "stopping"},
        "mixture": {"kind", "p", "left", "right"},
    }
    if kind not in allowed:
        raise DomainError(f"unknown joint kind {kind!r}")
    bad = set(joint) - allowed[kind]
    if bad:
        raise DomainError(f"unknown keys for joint {kind}: {sorted(bad)}")
    marg = [dc.from_dict(m) for m in spec.get("marginals", [])]
    try:
        if kind == "independent":
            model = IndependentComponents(tuple(marg))
        elif kind == "fgm_pair":
            if len(marg) != 2:
                raise DomainError("fgm_pair needs exactly two marginals")
            model = FgmPair(marg[0], marg[1], float(joint["theta"]))
        elif kind == "common_factor":
            model = common_factor(dc.from_dict(joint["R"]), joint["weights"])
        elif kind == "mrv":
            model = mrv_model(float(joint["alpha"]), joint["directions"], joint["pmf"], float(joint.get("r_scale", 1.0)))
        elif kind == "radial":
            model = RadialJoint(
                dc.from_dict(joint["R"]),
                tuple(tuple(map(float, d)) for d in joint["directions"]),
                tuple(map(float, joint["pmf"])),
            )
        elif kind == "scalar_product":
            model = scalar_product(
                vector_from_dict(joint["base"]), dc.from_dict(joint["y"]), kernel_from_dict(joint.get("dependence"))
            )
        elif kind == "sum":
            model = vector_sum(vector_from_dict(joint["left"]), vector_from_dict(joint["right"]))
        elif kind == "stopped_sum":
            model = stopped_vector_sum(vector_from_dict(joint["base"]), dc.stopping_from_dict(joint["stopping"]))
        else:
            model = vector_mixture(vector_from_dict(joint["left"]), vector_from_dict(joint["right"]), float(joint["p"]))
    except KeyError as exc:
        raise DomainError(f"missing key {exc} for joint {kind}") from None
    if kind not in ("independent", "fgm_pair") and marg:
        derived = [m.to_dict() for m in model.marginals]
        if [m.to_dict() for m in marg] != derived:
            raise DomainError(f"marginals given for joint {kind} do not match the construction")
    if "dim" in spec and int(spec["dim"]) != model.dim:
        raise DomainError(f"dim {spec['dim']} does not match the construction ({model.dim})")
    if "mc_samples" in spec:
        model.mc_samples = int(spec["mc_samples"])
    if "mc_seed" in spec:
        model.mc_seed = int(spec["mc_seed"])
    return model
