"""Vectorised composite Gauss-Legendre quadrature in log space.

All integrals in the package are of non-negative functions whose values span
hundreds of orders of magnitude, so integrands are supplied as logarithms and
the result is ``log(integral)``. Panels are refined by bisection until two
successive estimates agree to ``rtol`` (relative), row by row.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

LogIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]

# elements per integrand call; keeps temporaries to a few tens of MB
_CHUNK = 1_500_000


class QuadratureBudgetError(RuntimeError):
    """Refinement budget exhausted before reaching the requested tolerance."""


@lru_cache(maxsize=None)
def _gl(order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    return t, np.log(w)


def _logsumexp(a: np.ndarray, axis) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(a - m), axis=axis))
    return s + np.squeeze(m, axis=axis)


def _estimate(logfunc: LogIntegrand, edges: np.ndarray, rows: np.ndarray, order: int) -> np.ndarray:
    t, logw = _gl(order)
    a, b = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    per_row = edges.shape[1] - 1
    step = max(1, _CHUNK // max(1, per_row * order))
    out = np.empty(edges.shape[0])
    for start in range(0, edges.shape[0], step):
        sl = slice(start, start + step)
        nodes = mid[sl, :, None] + half[sl, :, None] * t
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = logfunc(nodes, rows[sl]) + logw + np.log(half[sl, :, None])
        vals = np.where(np.isnan(vals), -np.inf, vals)
        out[sl] = _logsumexp(vals.reshape(vals.shape[0], -1), axis=1)
    return out


def _bisect_panels(edges: np.ndarray) -> np.ndarray:
    mids = 0.5 * (edges[:, :-1] + edges[:, 1:])
    out = np.empty((edges.shape[0], 2 * edges.shape[1] - 1))
    out[:, 0::2] = edges
    out[:, 1::2] = mids
    return out


def log_integrate(
    logfunc: LogIntegrand,
    edges: np.ndarray,
    order: int = 16,
    rtol: float = 1e-10,
    max_refine: int = 5,
    strict: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``exp(logfunc)`` over the panels in ``edges``.

    ``edges`` has shape ``(rows, panels + 1)`` (a 1-d array is one row) and
    must be non-decreasing along each row. ``logfunc(nodes, rows)`` receives
    nodes of shape ``(len(rows), panels, order)`` plus the row indices they
    belong to and returns the log-integrand at those nodes.

    Returns ``(log_value, rel_err)`` per row. With ``strict=True`` an
    unconverged row raises :class:`QuadratureBudgetError`.
    """
    edges = np.atleast_2d(np.asarray(edges, dtype=float))
    nrow = edges.shape[0]
    rows = np.arange(nrow)
    est = _estimate(logfunc, edges, rows, order)
    err = np.full(nrow, np.inf)
    active = rows
    cur = edges
    for _ in range(max_refine):
        cur = _bisect_panels(cur)
        new = _estimate(logfunc, cur, active, order)
        old = est[active]
        with np.errstate(invalid="ignore"):
            e = np.where(new == old, 0.0, np.abs(new - old))
        est[active] = new
        err[active] = e
        keep = e > rtol
        if not keep.any():
            break
        active = active[keep]
        cur = cur[keep]
    if strict and np.any(err > rtol):
        worst = float(np.max(err))
        raise QuadratureBudgetError(f"quadrature relative error {worst:.3g} exceeds rtol {rtol:.3g}")
    return est, err


def log_decades(lo: float, hi: float, per_decade: int = 1) -> np.ndarray:
    """Edges uniform in log10 between ``lo`` and ``hi`` (both > 0)."""
    n = max(1, int(np.ceil(per_decade * (np.log10(hi) - np.log10(lo)))))
    return np.geomspace(lo, hi, n + 1)
