"""Monte Carlo for randomly weighted sums and discounted ruin.

Period i brings a net loss X_i and a discount factor Y_i >= 0; pairs are
i.i.d. across periods and coupled within a period by a dependence kernel.
With Theta_i = Y_1 ... Y_i the discounted loss process is
S_k = sum_{i<=k} X_i Theta_i and ruin within n periods means
max_{0<=k<=n} S_k > x.

Every quantity is estimated from hit counts on a fixed x grid. Counts are
integers, so merging chunks and workers is exact and the result depends only
on (seed, workers).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dependence import INDEPENDENT, DependenceKernel, kernel_from_dict, sample_pair
from .dist_core import DomainError, TailModel, from_dict
from .product_conv import ProductModel, grade_integral, moment
from .rng import RngStream, partition
from .tail_diagnostics import _num, matuszewska

MAX_HORIZON = 20
MIN_PATHS = 1_000_000
CHUNK = 1_000_000
MIN_HITS = 100
TARGETS = ("S_Y", "M_Y", "S_Y_plus", "sum_single", "psi", "sum_theta_terms")


@dataclass(frozen=True)
class RiskModelConfig:
    n: int
    f: TailModel
    g: TailModel
    kernel: DependenceKernel = INDEPENDENT

    def __post_init__(self):
        if not 1 <= int(self.n) <= MAX_HORIZON:
            raise DomainError(f"horizon must lie in 1..{MAX_HORIZON}")
        if self.g.support_left < 0:
            raise DomainError("discount factors must be non-negative")
        if not self.kernel.is_independent and not self.g.continuous:
            raise DomainError("FGM dependence needs a continuous discount law")

    def with_horizon(self, n: int) -> "RiskModelConfig":
        return RiskModelConfig(n, self.f, self.g, self.kernel)

    def to_dict(self) -> dict:
        return {"n": self.n, "f": self.f.to_dict(), "g": self.g.to_dict(), "dependence": self.kernel.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RiskModelConfig":
        extra = set(d) - {"n", "f", "g", "dependence"}
        if extra:
            raise DomainError(f"unknown risk model keys: {sorted(extra)}")
        return cls(int(d["n"]), from_dict(d["f"]), from_dict(d["g"]), kernel_from_dict(d.get("dependence")))


# ---------------------------------------------------------------------------
# paths


@dataclass
class PathBatch:
    """Raw draws of one chunk, kept only for inspection and tests."""

    losses: np.ndarray  # (paths, n)
    weights: np.ndarray
    theta: np.ndarray  # running products of weights
    discounted: np.ndarray  # losses * theta
    s_theta: np.ndarray  # partial sums of discounted losses
    ruin_max: np.ndarray  # max(0, S_1..S_k) per horizon k

    def recompute_s_theta(self) -> np.ndarray:
        """Partial sums rebuilt term by term from the stored pairs."""
        m, n = self.losses.shape
        out = np.empty((m, n))
        for k in range(n):
            acc = np.zeros(m)
            for i in range(k + 1):
                acc += self.losses[:, i] * np.prod(self.weights[:, : i + 1], axis=1)
            out[:, k] = acc
        return out


def simulate_paths(config: RiskModelConfig, m: int, stream: RngStream) -> PathBatch:
    n = config.n
    x, y = sample_pair(config.kernel, config.f, config.g, stream, m * n)
    x = x.reshape(m, n)
    y = y.reshape(m, n)
    theta = np.cumprod(y, axis=1)
    disc = x * theta
    s = np.cumsum(disc, axis=1)
    rmax = np.maximum.accumulate(np.maximum(s, 0.0), axis=1)
    return PathBatch(x, y, theta, disc, s, rmax)


def _exceed(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """For a sorted grid, the number of values strictly above each grid point."""
    idx = np.searchsorted(grid, values, side="left")
    counts = np.bincount(idx, minlength=grid.size + 1)
    return np.cumsum(counts[::-1])[::-1][1:]


@dataclass
class HitCounts:
    """Exceedance counts per grid point; all fields add across chunks."""

    paths: int
    single: dict  # target -> counts at horizon n
    ruin: np.ndarray  # (n, grid): max_{k' <= k} S > x
    term: np.ndarray  # (n, grid): X_i Theta_i > x
    term_pair: np.ndarray  # (n, n, grid): both terms i and j exceed x
    ruin_term: np.ndarray  # (n, n, grid): ruin by k and term i exceeds

    def __iadd__(self, other: "HitCounts") -> "HitCounts":
        self.paths += other.paths
        for k in self.single:
            self.single[k] = self.single[k] + other.single[k]
        self.ruin = self.ruin + other.ruin
        self.term = self.term + other.term
        self.term_pair = self.term_pair + other.term_pair
        self.ruin_term = self.ruin_term + other.ruin_term
        return self


def _chunk_counts(config: RiskModelConfig, grid: np.ndarray, m: int, stream: RngStream) -> HitCounts:
    b = simulate_paths(config, m, stream)
    n, k = config.n, grid.size
    yx = b.losses * b.weights
    s_y = np.cumsum(yx, axis=1)
    single = {
        "S_Y": _exceed(s_y[:, -1], grid),
        "M_Y": _exceed(s_y.max(axis=1), grid),
        "S_Y_plus": _exceed(np.sum(np.maximum(b.losses, 0.0) * b.weights, axis=1), grid),
    }
    ruin = np.stack([_exceed(b.ruin_max[:, j], grid) for j in range(n)])
    term = np.stack([_exceed(b.discounted[:, i], grid) for i in range(n)])
    pair = np.zeros((n, n, k), dtype=np.int64)
    cross = np.zeros((n, n, k), dtype=np.int64)
    for i in range(n):
        pair[i, i] = term[i]
        for j in range(i + 1, n):
            pair[i, j] = pair[j, i] = _exceed(np.minimum(b.discounted[:, i], b.discounted[:, j]), grid)
        for j in range(i, n):
            cross[j, i] = _exceed(np.minimum(b.ruin_max[:, j], b.discounted[:, i]), grid)
    return HitCounts(m, single, ruin, term, pair, cross)


def _worker(config: RiskModelConfig, grid: np.ndarray, m: int, stream: RngStream) -> HitCounts:
    total = None
    done = 0
    while done < m:
        size = min(CHUNK, m - done)
        c = _chunk_counts(config, grid, size, stream)
        if total is None:
            total = c
        else:
            total += c
        done += size
    return total


def count_hits(
    config: RiskModelConfig, grid: np.ndarray, n_samples: int, stream: RngStream, workers: int = 1
) -> HitCounts:
    """Exceedance counts over ``n_samples`` paths split across ``workers``."""
    sizes = [s for s in partition(n_samples, workers) if s > 0]
    streams = [stream.spawn(w) for w in range(len(sizes))]
    if len(sizes) == 1:
        parts = [_worker(config, grid, sizes[0], streams[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(sizes)) as ex:
            parts = list(ex.map(_worker, [config] * len(sizes), [grid] * len(sizes), sizes, streams))
    total = parts[0]
    for p in parts[1:]:
        total += p
    return total


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get("HEAVYTAIL_WORKERS", "1")))


# ---------------------------------------------------------------------------
# estimates


def _binomial(hits: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    p = hits / n
    return p, np.sqrt(p * (1.0 - p) / n)


def _ratio(num: np.ndarray, den: np.ndarray, num_sq: np.ndarray, cross: np.ndarray, den_sq: np.ndarray):
    """Ratio of two path totals and its delta-method stderr.

    The arguments are sums over paths of A, B, A^2, AB and B^2.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
        resid = np.maximum(num_sq - 2.0 * r * cross + r * r * den_sq, 0.0)
        se = np.sqrt(resid) / den
    return r, se


@dataclass
class SimResult:
    config: RiskModelConfig
    x_grid: np.ndarray
    estimates: dict
    stderr: dict
    n_samples: int
    seed: int
    workers: int
    psi_by_n: np.ndarray  # (n, grid)
    psi_by_n_stderr: np.ndarray
    terms_by_n: np.ndarray  # (n, grid): sum_{i<=k} P[X_i Theta_i > x]
    terms_by_n_stderr: np.ndarray
    ratio_by_n: np.ndarray  # psi(x, k) over the sum of term tails
    ratio_by_n_stderr: np.ndarray
    term_tails_mc: np.ndarray  # (n, grid)
    term_tails_quad: dict = field(default_factory=dict)  # i -> array, i <= 2
    flags: list = field(default_factory=list)

    @property
    def flagged(self) -> np.ndarray:
        bad = np.zeros(self.x_grid.size, dtype=bool)
        for fl in self.flags:
            bad[fl["index"]] = True
        return bad

    def ratio(self, num: str, den: str) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.estimates[num] / self.estimates[den]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "workers": self.workers,
            "x_grid": [float(v) for v in self.x_grid],
            "estimates": {k: [_num(v) for v in a] for k, a in self.estimates.items()},
            "stderr": {k: [_num(v) for v in a] for k, a in self.stderr.items()},
            "ratio_by_n": [[_num(v) for v in row] for row in self.ratio_by_n],
            "ratio_by_n_stderr": [[_num(v) for v in row] for row in self.ratio_by_n_stderr],
            "term_tails_quad": {str(i): [_num(v) for v in a] for i, a in self.term_tails_quad.items()},
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        lines = ["x,target,estimate,stderr,n_samples,seed"]
        for t in TARGETS:
            for x, e, s in zip(self.x_grid, self.estimates[t], self.stderr[t]):
                lines.append(f"{x!r},{t},{float(e)!r},{float(s)!r},{self.n_samples},{self.seed}")
        return "\n".join(lines) + "\n"


def single_term_model(config: RiskModelConfig) -> ProductModel:
    """Law of one within-period product Y X."""
    return ProductModel(config.f, config.g, config.kernel)


def _simulate(
    config: RiskModelConfig,
    x_grid,
    n_samples: int,
    stream: RngStream,
    workers: int | None,
    nested_terms: bool,
) -> SimResult:
    if n_samples < MIN_PATHS:
        raise DomainError(f"need at least {MIN_PATHS} paths")
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
        raise DomainError("x_grid must be strictly increasing")
    workers = resolve_workers(workers)
    hc = count_hits(config, xs, n_samples, stream, workers)
    n, big_n = config.n, hc.paths

    est, se = {}, {}
    for key in ("S_Y", "M_Y", "S_Y_plus"):
        est[key], se[key] = _binomial(hc.single[key], big_n)
    one = single_term_model(config)
    est["sum_single"] = n * np.asarray(one.tail(xs), dtype=float)
    se["sum_single"] = np.zeros_like(xs)

    psi, psi_se = _binomial(hc.ruin, big_n)
    term_p, _ = _binomial(hc.term, big_n)
    # B_k = number of exceeding terms among the first k
    cum_term = np.cumsum(hc.term, axis=0)
    cum_pair = np.cumsum(np.cumsum(hc.term_pair, axis=0), axis=1)
    b_sq = np.stack([cum_pair[k, k] for k in range(n)])
    ab = np.stack([hc.ruin_term[k, : k + 1].sum(axis=0) for k in range(n)])
    terms = cum_term / big_n
    terms_se = np.sqrt(np.maximum(b_sq / big_n - terms**2, 0.0) / big_n)
    ratio, ratio_se = _ratio(hc.ruin.astype(float), cum_term.astype(float), hc.ruin.astype(float), ab, b_sq)

    est["psi"], se["psi"] = psi[-1], psi_se[-1]
    est["sum_theta_terms"], se["sum_theta_terms"] = terms[-1], terms_se[-1]

    quad = {}
    if nested_terms:
        quad[1] = np.asarray(one.tail(xs), dtype=float)
        if n >= 2:
            quad[2] = np.asarray(ProductModel(one, config.g, INDEPENDENT).tail(xs), dtype=float)

    flags = []
    for j, x in enumerate(xs):
        if est["S_Y"][j] > 0.1:
            flags.append({"index": j, "x": float(x), "reason": "below 90th percentile of S_n^Y"})
        zero = [t for t in ("S_Y", "M_Y", "S_Y_plus", "psi", "sum_theta_terms") if est[t][j] == 0]
        if zero:
            flags.append({"index": j, "x": float(x), "reason": "zero hits: " + ",".join(zero)})
            for t in zero:
                se[t][j] = math.nan
        elif hc.ruin[-1, j] < MIN_HITS:
            flags.append({"index": j, "x": float(x), "reason": f"fewer than {MIN_HITS} ruin hits"})

    return SimResult(
        config=config,
        x_grid=xs,
        estimates=est,
        stderr=se,
        n_samples=big_n,
        seed=stream.seed,
        workers=workers,
        psi_by_n=psi,
        psi_by_n_stderr=psi_se,
        terms_by_n=terms,
        terms_by_n_stderr=terms_se,
        ratio_by_n=ratio,
        ratio_by_n_stderr=ratio_se,
        term_tails_mc=term_p,
        term_tails_quad=quad,
        flags=flags,
    )


def simulate_weighted_sums(
    config: RiskModelConfig, x_grid, n_samples: int, stream: RngStream, workers: int | None = None
) -> SimResult:
    """Tails of S_n^Y, M_n^Y and sum Y_i X_i^+ against n P[Y X > x]."""
    return _simulate(config, x_grid, n_samples, stream, workers, nested_terms=False)


def simulate_ruin(
    config: RiskModelConfig, x_grid, n_samples: int, stream: RngStream, workers: int | None = None
) -> SimResult:
    """Finite-horizon ruin probabilities for every horizon k <= n from one set of paths.

    The first two discounted term tails are also computed by nested product
    quadrature as an independent check of the path simulation.
    """
    return _simulate(config, x_grid, n_samples, stream, workers, nested_terms=True)


def anchored_grid(
    config: RiskModelConfig,
    stream: RngStream,
    levels: tuple[float, float] = (1e-2, 1e-5),
    points: int = 25,
    n_pilot: int = 2_000_000,
    aggregate: str = "ruin",
) -> np.ndarray:
    """Geometric x grid between two upper quantiles of a pilot aggregate.

    ``aggregate`` is ``"ruin"`` (running maximum of the discounted losses) or
    ``"sum"`` (the weighted sum S_n^Y).
    """
    hi_level, lo_level = levels
    pilot = stream.spawn(1 << 19)
    vals = []
    done = 0
    while done < n_pilot:
        m = min(CHUNK, n_pilot - done)
        b = simulate_paths(config, m, pilot)
        if aggregate == "ruin":
            vals.append(b.ruin_max[:, -1])
        elif aggregate == "sum":
            vals.append(np.sum(b.losses * b.weights, axis=1))
        else:
            raise DomainError(f"unknown aggregate {aggregate!r}")
        done += m
    v = np.concatenate(vals)
    lo, hi = np.quantile(v, [1.0 - hi_level, 1.0 - lo_level])
    if not (lo > 0 and hi > lo):
        raise DomainError("aggregate quantiles do not span a positive range")
    return np.geomspace(lo, hi, points)


# ---------------------------------------------------------------------------
# uniformity in the horizon


def max_power_moment(g: TailModel, alpha: float, beta: float) -> float:
    """E[max(Y^alpha, Y^beta)] for Y >= 0."""
    lo, hi = min(alpha, beta), max(alpha, beta)
    if lo == hi:
        return moment(g, hi)
    if g.support_right <= 1.0:
        return moment(g, lo)
    if g.support_left >= 1.0:
        return moment(g, hi)
    if math.isinf(moment(g, hi)):
        return math.inf

    def log_phi(y, om2v, r):
        with np.errstate(divide="ignore"):
            ly = np.log(y)
        return np.maximum(lo * ly, hi * ly)

    return float(np.exp(grade_integral(g, log_phi, 1)[0]))


@dataclass
class UniformityReport:
    applicable: bool
    gate: dict
    n_list: tuple
    x_grid: np.ndarray
    sup_deviation: np.ndarray
    sup_deviation_stderr: np.ndarray
    bins: list  # (x_lo, x_hi, mean deviation, stderr) over the last two decades
    shrinking: bool | None
    note: str = "infinite-horizon ruin is not simulated; the capped horizon stands in for it"

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "gate": {k: (_num(v) if isinstance(v, float) else v) for k, v in self.gate.items()},
            "n_list": list(self.n_list),
            "x_grid": [float(v) for v in self.x_grid],
            "sup_deviation": [_num(v) for v in self.sup_deviation],
            "sup_deviation_stderr": [_num(v) for v in self.sup_deviation_stderr],
            "bins": [[_num(v) for v in b] for b in self.bins],
            "shrinking": self.shrinking,
            "note": self.note,
        }


def moment_gate(f: TailModel, g: TailModel) -> dict:
    est = matuszewska(f)
    value = max_power_moment(g, est.alpha_hat, est.beta_hat)
    ok = (not est.alpha_infinite) and est.beta_hat > 0 and value < 1.0
    return {"alpha_hat": est.alpha_hat, "beta_hat": est.beta_hat, "moment": value, "passes": bool(ok)}


def check_uniform_asymptotics(
    config_base: RiskModelConfig,
    n_list=(1, 2, 3, 4, 5),
    x_grid=None,
    n_samples: int = 10_000_000,
    stream: RngStream | None = None,
    workers: int | None = None,
    sigmas: float = 2.0,
) -> UniformityReport:
    """Sup over horizons of |psi(x, k) / sum_{i<=k} P[X_i Theta_i > x] - 1|.

    All horizons share paths. The deviation is averaged over half-decade bins
    of the last two x decades; the sequence counts as shrinking when no bin
    exceeds its predecessor by more than ``sigmas`` combined standard errors.
    """
    n_list = tuple(sorted(set(int(k) for k in n_list)))
    if not n_list or n_list[0] < 1 or n_list[-1] > 10:
        raise DomainError("n_list must be a non-empty subset of 1..10")
    gate = moment_gate(config_base.f, config_base.g)
    if not gate["passes"]:
        empty = np.array([])
        return UniformityReport(False, gate, n_list, empty, empty, empty, [], None)
    stream = stream or RngStream(0)
    config = config_base.with_horizon(n_list[-1])
    if x_grid is None:
        x_grid = anchored_grid(config, stream, levels=(1e-1, 1e-5), points=33)
    res = simulate_ruin(config, x_grid, n_samples, stream, workers)
    rows = np.array(n_list) - 1
    dev = np.abs(res.ratio_by_n[rows] - 1.0)
    pick = np.argmax(dev, axis=0)
    sup = dev[pick, np.arange(dev.shape[1])]
    sup_se = res.ratio_by_n_stderr[rows][pick, np.arange(dev.shape[1])]

    xs = res.x_grid
    edges = xs[-1] / np.array([100.0, 10**1.5, 10.0, 10**0.5, 1.0])
    bins = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (xs >= a * (1 - 1e-12)) & (xs <= b * (1 + 1e-12))
        if not sel.any():
            continue
        mean = float(np.mean(sup[sel]))
        err = float(np.sqrt(np.sum(sup_se[sel] ** 2)) / sel.sum())
        bins.append((float(a), float(b), mean, err))
    shrinking = all(
        later[2] <= earlier[2] + sigmas * math.hypot(earlier[3], later[3]) for earlier, later in zip(bins, bins[1:])
    )
    return UniformityReport(True, gate, n_list, xs, sup, sup_se, bins, bool(shrinking and len(bins) >= 2))
