"""Numeric membership checks for heavy-tail classes.

Each class is reduced to a ratio statistic evaluated on a geometric grid that
starts at a deep quantile. A verdict combines two readings of the top decade
of that grid: its level (mean, max, min) and its log-log slope.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .dist_core import DomainError, PositivePart, TailModel, log_convolve_tail

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"

CLASS_IDS = ("D", "C", "L", "S", "OS", "OL", "PD", "M", "Mstar", "K", "A", "OA", "T", "DL", "DA")
COMPOSITES = {
    "A": ("S", "PD"),
    "OA": ("OS", "PD"),
    "T": ("L", "PD"),
    "DL": ("D", "L"),
    "DA": ("D", "A"),
}


@dataclass(frozen=True)
class Tolerances:
    """Every threshold used by the verdict rules."""

    flat_slope: float = 0.02
    slope_sigmas: float = 3.0
    pd_margin: float = 0.05
    limit_tol: float = 0.02
    s_tol: float = 0.1
    m_threshold: float = 0.01
    k_cap: float = 1e300
    k_eps: tuple[float, ...] = (1.0, 0.1, 0.01, 0.001)
    c_bs: tuple[float, ...] = (0.99, 0.97, 0.95, 0.9)
    d_b: float = 0.5
    pd_v: float = 2.0
    shift_a: float = 1.0
    min_hits: int = 50

    @classmethod
    def from_dict(cls, d: dict) -> "Tolerances":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown tolerance keys: {sorted(extra)}")
        conv = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return replace(cls(), **conv)


@dataclass(frozen=True)
class GridSpec:
    """Geometric x-grid starting at the (1 - start_level) quantile unless start_x is given."""

    n_points: int = 41
    decades: float = 4.0
    start_level: float = 1e-3
    start_x: float | None = None

    def __post_init__(self):
        if self.n_points < 30 or self.decades < 4:
            raise DomainError("diagnostic grids need >= 30 points over >= 4 decades")

    def xs(self, f: TailModel | None = None) -> np.ndarray:
        x0 = self.start_x
        if x0 is None:
            if f is None:
                raise DomainError("grid needs a model or an explicit start_x")
            x0 = float(f.isf(self.start_level))
        x0 = max(x0, 1e-300)
        return np.geomspace(x0, x0 * 10**self.decades, self.n_points)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise DomainError(f"unknown grid keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class RatioCurve:
    label: str
    xs: np.ndarray
    log_values: np.ndarray
    stderr: np.ndarray
    slope: float
    slope_stderr: float
    limit_estimate: float
    top_max: float
    top_min: float

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    @property
    def top(self) -> np.ndarray:
        return self.xs >= self.xs[-1] / 10.0

    def to_dict(self) -> dict:
        return {
            "curve_id": self.label,
            "slope": _num(self.slope),
            "slope_stderr": _num(self.slope_stderr),
            "limit_estimate": _num(self.limit_estimate),
            "top_max": _num(self.top_max),
            "top_min": _num(self.top_min),
            "x_min": float(self.xs[0]),
            "x_max": float(self.xs[-1]),
        }


def _num(v: float):
    """JSON-safe float (infinities and NaN become strings)."""
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def make_curve(label: str, xs, log_values, stderr=None) -> RatioCurve:
    """Build a curve and its top-decade summary from log ratio values.

    ``stderr`` is the standard error of the ratio itself (zero for exact tails).
    """
    xs = np.asarray(xs, dtype=float)
    lv = np.asarray(log_values, dtype=float)
    se = np.zeros_like(xs) if stderr is None else np.asarray(stderr, dtype=float)
    top = xs >= xs[-1] / 10.0
    lx, ly = np.log(xs[top]), lv[top]
    if np.all(np.isfinite(ly)) and top.sum() >= 2:
        w = (lx - lx.mean()) / np.sum((lx - lx.mean()) ** 2)
        slope = float(np.sum(w * ly))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_se = np.where(se[top] > 0, se[top] / np.exp(ly), 0.0)
        slope_se = float(np.sqrt(np.sum((w * log_se) ** 2)))
    elif np.any(np.isposinf(ly)):
        slope, slope_se = math.inf, 0.0
    elif np.any(np.isneginf(ly)):
        slope, slope_se = -math.inf, 0.0
    else:
        slope, slope_se = math.nan, 0.0
    with np.errstate(over="ignore"):
        vals = np.exp(ly)
    return RatioCurve(
        label=label,
        xs=xs,
        log_values=lv,
        stderr=se,
        slope=slope,
        slope_stderr=slope_se,
        limit_estimate=float(np.mean(vals)) if vals.size else math.nan,
        top_max=float(np.max(vals)) if vals.size else math.nan,
        top_min=float(np.min(vals)) if vals.size else math.nan,
    )


# ---------------------------------------------------------------------------
# transforms


@dataclass(frozen=True)
class Transform:
    kind: str  # scale | shift | self_convolve | integrated
    param: float | None = None
    weighted: bool = False

    @property
    def label(self) -> str:
        if self.kind == "scale":
            return f"scale(b={self.param:g})"
        if self.kind == "shift":
            return f"shift(a={self.param:g})"
        if self.kind == "integrated":
            return "x_tail_over_tail_integral" if self.weighted else "tail_over_tail_integral"
        return self.kind


def scale(b: float) -> Transform:
    if not b > 0:
        raise DomainError("scale factor must be positive")
    return Transform("scale", float(b))


def shift(a: float) -> Transform:
    return Transform("shift", float(a))


def self_convolve() -> Transform:
    return Transform("self_convolve")


def integrated(weighted: bool) -> Transform:
    return Transform("integrated", weighted=weighted)


def log_ratio(f: TailModel, transform: Transform, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    with np.errstate(invalid="ignore"):
        base = np.asarray(f.log_tail(xs))
        if transform.kind == "scale":
            out = np.asarray(f.log_tail(transform.param * xs)) - base
        elif transform.kind == "shift":
            out = np.asarray(f.log_tail(xs - transform.param)) - base
        elif transform.kind == "self_convolve":
            fp = f if f.non_negative else PositivePart(f)
            out = np.asarray(log_convolve_tail(fp, fp, xs)) - np.asarray(fp.log_tail(xs))
        elif transform.kind == "integrated":
            m = f.mean
            if not (f.non_negative and 0 < m < math.inf):
                raise DomainError("integrated-tail ratios need a non-negative model with positive, finite mean")
            out = base - np.asarray(f.log_tail_integral(xs))
            if transform.weighted:
                out = out + np.log(xs)
        else:
            raise DomainError(f"unknown transform {transform.kind!r}")
    return out


def ratio_curve(f: TailModel, transform: Transform, grid: GridSpec | None = None) -> RatioCurve:
    grid = grid or GridSpec()
    xs = grid.xs(f)
    return make_curve(transform.label, xs, log_ratio(f, transform, xs))


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class ClassVerdict:
    class_id: str
    verdict: str
    evidence: list[RatioCurve] = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_dict(self) -> dict:
        lead = self.evidence[0] if self.evidence else None
        return {
            "class": self.class_id,
            "verdict": self.verdict,
            "limit_estimate": _num(lead.limit_estimate) if lead else None,
            "slope": _num(lead.slope) if lead else None,
            "grid": {"x_min": float(lead.xs[0]), "x_max": float(lead.xs[-1]), "n_points": int(lead.xs.size)}
            if lead
            else {},
            "parameters": self.parameters,
            "note": self.note,
            "curves": [c.to_dict() for c in self.evidence],
        }


def _flat_band(c: RatioCurve, tol: Tolerances) -> float:
    return max(tol.flat_slope, tol.slope_sigmas * c.slope_stderr)


def is_flat(c: RatioCurve, tol: Tolerances) -> bool:
    return math.isfinite(c.slope) and abs(c.slope) <= _flat_band(c, tol)


def is_rising(c: RatioCurve, tol: Tolerances) -> bool:
    return c.slope > _flat_band(c, tol) or c.slope == math.inf


def is_falling(c: RatioCurve, tol: Tolerances) -> bool:
    return c.slope < -_flat_band(c, tol)


def combine(verdicts: Iterable[str]) -> str:
    vs = list(verdicts)
    if all(v == HOLDS for v in vs):
        return HOLDS
    if any(v == FAILS for v in vs):
        return FAILS
    return INCONCLUSIVE


def _bounded_verdict(c: RatioCurve, tol: Tolerances) -> str:
    if not math.isfinite(c.top_max) or is_rising(c, tol):
        return FAILS
    return HOLDS


def _check_D(f, grid, tol):
    c = ratio_curve(f, scale(tol.d_b), grid)
    return _bounded_verdict(c, tol), [c], {"b": tol.d_b}


def _check_PD(f, grid, tol):
    c = ratio_curve(f, scale(tol.pd_v), grid)
    if c.top_max < 1 - tol.pd_margin:
        v = HOLDS
    elif is_flat(c, tol) or is_rising(c, tol):
        v = FAILS
    else:
        v = INCONCLUSIVE
    return v, [c], {"v": tol.pd_v}


def _limit_verdict(c: RatioCurve, target: float, band: float, tol: Tolerances) -> str:
    lim = c.limit_estimate
    if abs(lim - target) <= band and math.isfinite(c.top_max) and abs(c.top_max - target) <= band:
        return HOLDS
    if is_rising(c, tol) or not math.isfinite(lim) or is_flat(c, tol):
        return FAILS
    return INCONCLUSIVE


def _check_L(f, grid, tol):
    c = ratio_curve(f, shift(tol.shift_a), grid)
    return _limit_verdict(c, 1.0, tol.limit_tol, tol), [c], {"a": tol.shift_a}


def _check_OL(f, grid, tol):
    c = ratio_curve(f, shift(tol.shift_a), grid)
    return _bounded_verdict(c, tol), [c], {"a": tol.shift_a}


def _check_C(f, grid, tol):
    curves = [ratio_curve(f, scale(b), grid) for b in tol.c_bs]
    params = {"b": list(tol.c_bs)}
    if any(is_rising(c, tol) or not math.isfinite(c.top_max) for c in curves):
        return FAILS, curves, params
    # limsup values follow b^(-index) for regular variation, so fit in log-log
    lb = np.log(np.array(tol.c_bs))
    ly = np.log([c.top_max for c in curves])
    slope, intercept = np.polyfit(lb, ly, 1)
    extrapolated = float(np.exp(intercept))
    params["extrapolated"] = extrapolated
    if abs(extrapolated - 1.0) <= tol.limit_tol:
        return HOLDS, curves, params
    if all(is_flat(c, tol) for c in curves):
        return FAILS, curves, params
    return INCONCLUSIVE, curves, params


def _check_S(f, grid, tol):
    c = ratio_curve(f, self_convolve(), grid)
    return _limit_verdict(c, 2.0, tol.s_tol, tol), [c], {}


def _check_OS(f, grid, tol):
    c = ratio_curve(f, self_convolve(), grid)
    return _bounded_verdict(c, tol), [c], {}


def _check_M(f, grid, tol):
    c = ratio_curve(f, integrated(False), grid)
    if c.top_max < tol.m_threshold and is_falling(c, tol):
        v = HOLDS
    elif (is_flat(c, tol) or is_rising(c, tol)) and c.top_min > tol.m_threshold:
        v = FAILS
    else:
        v = INCONCLUSIVE
    return v, [c], {"threshold": tol.m_threshold}


def _check_Mstar(f, grid, tol):
    c = ratio_curve(f, integrated(True), grid)
    return _bounded_verdict(c, tol), [c], {}


def mgf_status(f: TailModel, eps: float, cap: float = 1e300, n: int = 4000) -> str:
    """'diverges', 'converges' or 'undecided' for E exp(eps X), X >= 0.

    Uses E exp(eps X) = 1 + eps * int_0^inf exp(eps y) P[X > y] dy and scans
    the log-integrand on a grid reaching well past the point where a
    polynomially or stretched-exponentially decaying tail loses to exp(eps y).
    """
    log_cap = math.log(cap)
    y_max = 10.0 * (log_cap + 60.0) / eps
    y_lo = max(f.support_left, 1e-12)
    ys = np.geomspace(y_lo, y_max, n)
    li = eps * ys + np.asarray(f.log_tail(ys))
    # a window [y/2, y] contributes at least (y/2) * min of the integrand there
    window = np.minimum(li, np.concatenate([[li[0]], li[:-1]]))
    if np.any(np.isfinite(li) & (window + np.log(eps * ys / 2) > log_cap)):
        return "diverges"
    tail = li[ys >= y_max / 10]
    if np.all(tail < -60.0) and np.all(np.diff(tail) <= 0):
        return "converges"
    return "undecided"


def _check_K(f, grid, tol):
    if not math.isinf(f.support_right):
        return FAILS, [], {"note": "bounded support"}
    fp = f if f.non_negative else PositivePart(f)
    status = {e: mgf_status(fp, e, tol.k_cap) for e in tol.k_eps}
    if all(s == "diverges" for s in status.values()):
        v = HOLDS
    elif any(s == "converges" for s in status.values()):
        v = FAILS
    else:
        v = INCONCLUSIVE
    return v, [], {"eps": list(tol.k_eps), "status": {str(k): s for k, s in status.items()}}


_RULES = {
    "D": _check_D,
    "C": _check_C,
    "L": _check_L,
    "S": _check_S,
    "OS": _check_OS,
    "OL": _check_OL,
    "PD": _check_PD,
    "M": _check_M,
    "Mstar": _check_Mstar,
    "K": _check_K,
}

# classes that force infinite support; bounded models are outside them
_NEED_UNBOUNDED = {"D", "C", "L", "S", "OS", "OL", "K"}


def check_class(
    f: TailModel, class_id: str, grid: GridSpec | None = None, tol: Tolerances | None = None
) -> ClassVerdict:
    if class_id not in CLASS_IDS:
        raise DomainError(f"unknown class {class_id!r}")
    grid = grid or GridSpec()
    tol = tol or Tolerances()
    if class_id in COMPOSITES:
        parts = [check_class(f, c, grid, tol) for c in COMPOSITES[class_id]]
        evidence = [c for p in parts for c in p.evidence]
        return ClassVerdict(
            class_id,
            combine(p.verdict for p in parts),
            evidence,
            {p.class_id: p.verdict for p in parts},
        )
    if math.isfinite(f.support_right):
        if class_id in _NEED_UNBOUNDED:
            return ClassVerdict(class_id, FAILS, note="finite right endpoint")
        return ClassVerdict(class_id, INCONCLUSIVE, note="finite right endpoint; ratios undefined near it")
    verdict, curves, params = _RULES[class_id](f, grid, tol)
    return ClassVerdict(class_id, verdict, curves, params)


def classify(f: TailModel, classes: Sequence[str] = CLASS_IDS, grid=None, tol=None) -> dict[str, ClassVerdict]:
    """All requested verdicts; constituent checks are shared with composites."""
    grid = grid or GridSpec()
    tol = tol or Tolerances()
    base: dict[str, ClassVerdict] = {}

    def get(cid: str) -> ClassVerdict:
        if cid not in base:
            if cid in COMPOSITES:
                parts = [get(c) for c in COMPOSITES[cid]]
                base[cid] = ClassVerdict(
                    cid,
                    combine(p.verdict for p in parts),
                    [c for p in parts for c in p.evidence],
                    {p.class_id: p.verdict for p in parts},
                )
            else:
                base[cid] = check_class(f, cid, grid, tol)
        return base[cid]

    return {c: get(c) for c in classes}


# ---------------------------------------------------------------------------
# Matuszewska indices


@dataclass
class MatuszewskaEstimate:
    beta_hat: float
    alpha_hat: float
    v_grid: tuple[float, ...]
    truncation_x: float
    beta_infinite: bool = False
    alpha_infinite: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_hat"] = _num(self.beta_hat)
        d["alpha_hat"] = _num(self.alpha_hat)
        d["v_grid"] = list(self.v_grid)
        return d


def matuszewska(
    f: TailModel,
    v_grid: Sequence[float] = (1.5, 2.0, 3.0, 5.0, 10.0),
    truncation_x: float | None = None,
    grid: GridSpec | None = None,
    tol: Tolerances | None = None,
) -> MatuszewskaEstimate:
    """Lower (beta) and upper (alpha) index estimates from top-decade ratios.

    A ratio curve still trending down at the top of the grid is read as a
    zero limit, which makes the index infinite (flagged).
    """
    v_grid = tuple(float(v) for v in v_grid)
    if len(v_grid) < 5 or min(v_grid) <= 1:
        raise DomainError("need at least 5 scaling factors, all > 1")
    if math.isfinite(f.support_right):
        raise DomainError("indices need an infinite right endpoint")
    tol = tol or Tolerances()
    grid = grid or GridSpec()
    if truncation_x is not None:
        x0 = truncation_x / 10**grid.decades
        grid = replace(grid, start_x=x0)
    betas, alphas = [], []
    x_top = math.nan
    for v in v_grid:
        c = ratio_curve(f, scale(v), grid)
        x_top = float(c.xs[-1])
        if is_falling(c, tol) or c.top_min <= 0:
            betas.append(math.inf)
            alphas.append(math.inf)
            continue
        betas.append(-math.log(c.top_max) / math.log(v))
        alphas.append(-math.log(c.top_min) / math.log(v))
    beta, alpha = max(betas), min(alphas)
    beta = min(beta, alpha)
    return MatuszewskaEstimate(
        beta_hat=max(beta, 0.0),
        alpha_hat=max(alpha, 0.0),
        v_grid=v_grid,
        truncation_x=x_top,
        beta_infinite=math.isinf(beta),
        alpha_infinite=math.isinf(alpha),
    )


# ---------------------------------------------------------------------------
# export


def curves_csv(curves: Iterable[RatioCurve], prefix: str = "") -> str:
    """Rows (curve_id, x, value, stderr) with shortest round-trip floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve_id", "x", "value", "stderr"])
    for c in curves:
        for x, v, s in zip(c.xs, c.values, c.stderr):
            w.writerow([prefix + c.label, repr(float(x)), repr(float(v)), repr(float(s))])
    return buf.getvalue()


def verdicts_csv(rows: Iterable[tuple[str, ClassVerdict]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "class", "verdict", "limit_estimate", "slope"])
    for model_id, v in rows:
        lead = v.evidence[0] if v.evidence else None
        w.writerow(
            [model_id, v.class_id, v.verdict, repr(lead.limit_estimate) if lead else "", repr(lead.slope) if lead else ""]
        )
    return buf.getvalue()


def verdict_json(v: ClassVerdict) -> str:
    return json.dumps(v.to_dict(), sort_keys=True)
