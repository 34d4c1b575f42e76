"""Command-line batch runner.

    heavytail classify|product|mixture|risk|mvec|matrix --config run.json --seed N [--workers k] [--out dir]

Each run writes ``report.json`` (verdict trees plus the tolerances used) and
``curves.csv`` (curve_id, x, value, stderr) into the output directory; the
``risk`` command also writes ``risk.csv``. Exit status: 0 when every requested
confirmation passed or was not applicable, 2 when one came out false, 1 on a
configuration or IO error (one JSON line on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import multivar as mv
from .dependence import kernel_from_dict
from .dist_core import DomainError, from_dict, stopping_from_dict
from .product_conv import PRODUCT_CLASSES, ClosureReport, verify_mixture_closure, verify_product_closure
from .risk_sim import (
    RiskModelConfig,
    anchored_grid,
    check_uniform_asymptotics,
    resolve_workers,
    simulate_ruin,
    simulate_weighted_sums,
)
from .rng import RngStream
from .tail_diagnostics import CLASS_IDS, GridSpec, RatioCurve, Tolerances, classify, curves_csv, matuszewska

COMMANDS = ("classify", "product", "mixture", "risk", "mvec", "matrix")


class ConfigError(ValueError):
    pass


def _keys(d: dict, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _settings(cfg: dict) -> tuple[Tolerances, GridSpec]:
    return Tolerances.from_dict(cfg.get("tolerances", {})), GridSpec.from_dict(cfg.get("grid", {}))


def _tol_dict(tol: Tolerances) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(tol).items()}


class Run:
    """Accumulates report sections, curves and confirmation outcomes."""

    def __init__(self, command: str, seed: int, workers: int, tol: Tolerances, grid: GridSpec):
        self.report = {
            "command": command,
            "seed": seed,
            "workers": workers,
            "tolerances": _tol_dict(tol),
            "grid": asdict(grid),
        }
        self.curves: list[tuple[str, RatioCurve]] = []
        self.outcomes: list = []
        self.extra_files: dict[str, str] = {}

    def add_curves(self, prefix: str, curves) -> None:
        self.curves.extend((prefix, c) for c in curves)

    def closure(self, row_id: str, rep: ClosureReport) -> dict:
        self.outcomes.append(rep.theorem_confirmed)
        if rep.conclusion is not None:
            self.add_curves(row_id + ":", rep.conclusion.evidence)
        return {"id": row_id, **rep.to_dict()}

    @property
    def exit_code(self) -> int:
        return 2 if any(o is False for o in self.outcomes) else 0

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.report, sort_keys=True, indent=1) + "\n")
        parts = [curves_csv([c], prefix) for prefix, c in self.curves]
        body = "curve_id,x,value,stderr\n" + "".join(p.split("\n", 1)[1] for p in parts)
        (out / "curves.csv").write_text(body)
        for name, text in self.extra_files.items():
            (out / name).write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_classify(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(cfg, {"model", "classes", "tolerances", "grid", "matuszewska"}, "classify config")
    model = from_dict(cfg["model"])
    classes = cfg.get("classes", list(CLASS_IDS))
    verdicts = classify(model, classes, grid, tol)
    run.report["model"] = model.to_dict()
    run.report["verdicts"] = {k: v.to_dict() for k, v in verdicts.items()}
    for k, v in verdicts.items():
        run.add_curves(f"{k}:", v.evidence)
    if cfg.get("matuszewska", True) and math.isinf(model.support_right):
        run.report["matuszewska"] = matuszewska(model, grid=grid, tol=tol).to_dict()


def cmd_product(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(cfg, {"f", "g", "dependence", "classes", "tolerances", "grid"}, "product config")
    f, g = from_dict(cfg["f"]), from_dict(cfg["g"])
    kernel = kernel_from_dict(cfg.get("dependence"))
    rows = []
    for cid in cfg.get("classes", list(PRODUCT_CLASSES)):
        rows.append(run.closure(f"product:{cid}", verify_product_closure(f, g, kernel, cid, grid, tol)))
    run.report.update({"f": f.to_dict(), "g": g.to_dict(), "dependence": kernel.to_dict(), "rows": rows})


def cmd_mixture(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(cfg, {"f1", "f2", "p", "classes", "tolerances", "grid"}, "mixture config")
    f1, f2, p = from_dict(cfg["f1"]), from_dict(cfg["f2"]), float(cfg["p"])
    rows = []
    for cid in cfg.get("classes", ["PD", "T"]):
        rows.append(run.closure(f"mixture:{cid}", verify_mixture_closure(f1, f2, p, cid, grid, tol)))
    run.report.update({"f1": f1.to_dict(), "f2": f2.to_dict(), "p": p, "rows": rows})


def cmd_risk(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(
        cfg,
        {"model", "n_samples", "x_grid", "simulate", "uniformity", "tolerances", "grid"},
        "risk config",
    )
    config = RiskModelConfig.from_dict(cfg["model"])
    stream = RngStream(seed)
    workers = run.report["workers"]
    n_samples = int(cfg.get("n_samples", 1_000_000))
    kind = cfg.get("simulate", "ruin")
    if kind not in ("ruin", "weighted_sums"):
        raise ConfigError("simulate must be 'ruin' or 'weighted_sums'")
    xg = cfg.get("x_grid", {})
    if isinstance(xg, list):
        xs = np.asarray(xg, dtype=float)
    else:
        _keys(xg, {"levels", "points", "n_pilot"}, "x_grid")
        xs = anchored_grid(
            config,
            stream,
            tuple(xg.get("levels", (1e-2, 1e-5))),
            int(xg.get("points", 25)),
            int(xg.get("n_pilot", 2_000_000)),
            aggregate="ruin" if kind == "ruin" else "sum",
        )
    sim = simulate_ruin if kind == "ruin" else simulate_weighted_sums
    res = sim(config, xs, n_samples, stream, workers)
    run.report["simulation"] = res.to_dict()
    run.extra_files["risk.csv"] = res.to_csv()
    if "uniformity" in cfg:
        u = cfg["uniformity"]
        _keys(u, {"n_list", "n_samples"}, "uniformity")
        rep = check_uniform_asymptotics(
            config,
            tuple(u.get("n_list", (1, 2, 3, 4, 5))),
            n_samples=int(u.get("n_samples", n_samples)),
            stream=stream.spawn(7),
            workers=workers,
        )
        confirmed = "not-applicable" if not rep.applicable else bool(rep.shrinking)
        run.outcomes.append(confirmed)
        run.report["uniformity"] = {**rep.to_dict(), "theorem_confirmed": confirmed}


def _vector(spec: dict, seed: int) -> mv.VectorModel:
    model = mv.vector_from_dict(spec)
    if "mc_seed" not in spec:
        _set_seed(model, seed)
    return model


def _set_seed(model, seed: int) -> None:
    """Seed every simulated part of a vector construction from the run seed."""
    model.mc_seed = seed
    for name in ("left", "right", "base"):
        sub = getattr(model, name, None)
        if isinstance(sub, mv.VectorModel):
            _set_seed(sub, seed)


def cmd_mvec(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(
        cfg,
        {"model", "checks", "scalar_product", "sum_with", "stopped", "mixture_with", "tolerances", "grid"},
        "mvec config",
    )
    model = _vector(cfg["model"], seed)
    run.report["model"] = model.to_dict()
    checks = {}
    for name in cfg.get("checks", ["Dn"]):
        if name == "Dn":
            v = mv.check_Dn(model, grid=grid, tol=tol)
        elif name == "PDn":
            v = mv.check_PDn(model, grid=grid, tol=tol)
        elif name == "linear_combination":
            v = mv.check_linear_combination(model, grid=grid, tol=tol)
        elif name in ("mrv_Dn", "mrv_PDn"):
            rep = mv.verify_mrv_closure(model, name.split("_")[1], grid, tol)
            checks[name] = run.closure(name, rep)
            continue
        else:
            raise ConfigError(f"unknown vector check {name!r}")
        checks[name] = v.to_dict()
        run.add_curves(f"{name}:", v.evidence)
    rows = []
    if "scalar_product" in cfg:
        sp = cfg["scalar_product"]
        _keys(sp, {"y", "dependence", "target"}, "scalar_product")
        rep = mv.verify_scalar_product_closure(
            model, from_dict(sp["y"]), kernel_from_dict(sp.get("dependence")), sp.get("target", "Dn"), grid, tol
        )
        rows.append(run.closure("scalar_product", rep))
    if "sum_with" in cfg:
        rows.append(run.closure("vector_sum", mv.verify_vector_sum_closure(model, _vector(cfg["sum_with"], seed), grid, tol)))
    if "stopped" in cfg:
        rep = mv.verify_stopped_sum_closure(model, stopping_from_dict(cfg["stopped"]), grid, tol)
        rows.append(run.closure("stopped_sum", rep))
    if "mixture_with" in cfg:
        mw = cfg["mixture_with"]
        _keys(mw, {"p", "model"}, "mixture_with")
        rep = mv.verify_vector_mixture_closure(model, _vector(mw["model"], seed), float(mw["p"]), grid, tol)
        rows.append(run.closure("vector_mixture", rep))
    run.report.update({"checks": checks, "rows": rows})


# ---------------------------------------------------------------------------
# theorem matrix


def _pareto(alpha, xm=1.0):
    return {"family": "pareto", "alpha": alpha, "xm": xm}


_U01 = {"family": "uniform", "lo": 0.0, "hi": 1.0}
_EXP1 = {"family": "exponential", "rate": 1.0}
_WEIB = {"family": "weibull", "tau": 0.5, "lambda": 1.0}
_LOGN = {"family": "lognormal", "mu": 0.0, "sigma": 1.0}
_FGM = {"kind": "fgm", "theta": 0.5}
_CF_PARETO = {"dim": 2, "joint": {"kind": "common_factor", "R": _pareto(2.0), "weights": [1.0, 1.0]}}
_CF_PARETO3 = {"dim": 2, "joint": {"kind": "common_factor", "R": _pareto(3.0), "weights": [1.0, 1.0]}}
_MRV_DIAG = {
    "dim": 2,
    "joint": {"kind": "mrv", "alpha": 2.0, "directions": [[0.7071067811865476, 0.7071067811865476]], "pmf": [1.0]},
}
_MRV_TWO = {"dim": 2, "joint": {"kind": "mrv", "alpha": 2.0, "directions": [[1.0, 0.5], [0.5, 1.0]], "pmf": [0.5, 0.5]}}


def default_matrix() -> list[dict]:
    rows = []
    for cid in PRODUCT_CLASSES:
        rows.append({"kind": "product", "f": _pareto(2.0), "g": _U01, "dependence": _FGM, "class": cid})
    for cid in ("D", "T", "PD", "K", "OS", "OL", "M"):
        rows.append({"kind": "product", "f": _WEIB, "g": _EXP1, "dependence": _FGM, "class": cid})
    for cid in ("T", "PD", "OL", "K"):
        rows.append({"kind": "product", "f": _LOGN, "g": _EXP1, "class": cid})
    for cid in ("D", "PD", "C"):
        rows.append({"kind": "product", "f": _pareto(1.5), "g": {"family": "lognormal", "mu": 0.0, "sigma": 0.5}, "class": cid})
    for cid in ("D", "PD", "Mstar", "M"):
        rows.append({"kind": "product", "f": _pareto(2.0), "g": _EXP1, "class": cid})
    rows += [
        {"kind": "mixture", "f1": _pareto(2.0), "f2": _pareto(3.0), "p": 0.3, "class": "PD"},
        {"kind": "mixture", "f1": _pareto(2.0), "f2": _WEIB, "p": 0.5, "class": "T"},
        {"kind": "mixture", "f1": _pareto(2.0), "f2": _EXP1, "p": 0.5, "class": "T"},
        {"kind": "mixture", "f1": _LOGN, "f2": _EXP1, "p": 0.5, "class": "PD"},
        {"kind": "scalar_product", "model": _CF_PARETO, "y": _U01, "target": "Dn"},
        {"kind": "scalar_product", "model": _CF_PARETO, "y": _U01, "target": "PDn"},
        {"kind": "vector_sum", "model": _CF_PARETO, "other": _CF_PARETO},
        {"kind": "stopped_sum", "model": _CF_PARETO, "stopping": {"kind": "uniform", "values": [1, 2]}},
        {"kind": "vector_mixture", "model": _CF_PARETO, "other": _CF_PARETO3, "p": 0.3},
        {"kind": "mrv", "model": _MRV_DIAG, "target": "Dn"},
        {"kind": "mrv", "model": _MRV_TWO, "target": "PDn"},
    ]
    return rows


_ROW_KEYS = {
    "product": {"kind", "f", "g", "dependence", "class"},
    "mixture": {"kind", "f1", "f2", "p", "class"},
    "scalar_product": {"kind", "model", "y", "dependence", "target"},
    "vector_sum": {"kind", "model", "other"},
    "stopped_sum": {"kind", "model", "stopping"},
    "vector_mixture": {"kind", "model", "other", "p"},
    "mrv": {"kind", "model", "target"},
}


def matrix_row(row: dict, seed: int, grid: GridSpec, tol: Tolerances) -> ClosureReport:
    kind = row.get("kind")
    if kind not in _ROW_KEYS:
        raise ConfigError(f"unknown matrix row kind {kind!r}")
    _keys(row, _ROW_KEYS[kind], f"matrix row ({kind})")
    if kind == "product":
        return verify_product_closure(
            from_dict(row["f"]), from_dict(row["g"]), kernel_from_dict(row.get("dependence")), row["class"], grid, tol
        )
    if kind == "mixture":
        return verify_mixture_closure(from_dict(row["f1"]), from_dict(row["f2"]), float(row["p"]), row["class"], grid, tol)
    model = _vector(row["model"], seed)
    if kind == "scalar_product":
        return mv.verify_scalar_product_closure(
            model, from_dict(row["y"]), kernel_from_dict(row.get("dependence")), row.get("target", "Dn"), grid, tol
        )
    if kind == "vector_sum":
        return mv.verify_vector_sum_closure(model, _vector(row["other"], seed), grid, tol)
    if kind == "stopped_sum":
        return mv.verify_stopped_sum_closure(model, stopping_from_dict(row["stopping"]), grid, tol)
    if kind == "vector_mixture":
        return mv.verify_vector_mixture_closure(model, _vector(row["other"], seed), float(row["p"]), grid, tol)
    return mv.verify_mrv_closure(model, row.get("target", "Dn"), grid, tol)


def cmd_matrix(cfg: dict, run: Run, tol: Tolerances, grid: GridSpec, seed: int) -> None:
    _keys(cfg, {"rows", "default", "tolerances", "grid"}, "matrix config")
    rows = list(cfg.get("rows", []))
    if cfg.get("default", False):
        rows = default_matrix() + rows
    table = []
    for i, row in enumerate(rows):
        rep = matrix_row(row, seed, grid, tol)
        entry = run.closure(f"row{i:03d}", rep)
        entry["spec"] = row
        entry["verdict"] = rep.conclusion.verdict if rep.conclusion else None
        table.append(entry)
    run.report["rows"] = table
    run.report["summary"] = {
        "rows": len(table),
        "confirmed": sum(1 for r in table if r["theorem_confirmed"] is True),
        "not_applicable": sum(1 for r in table if r["theorem_confirmed"] == "not-applicable"),
        "confirmed_false": sum(1 for r in table if r["theorem_confirmed"] is False),
    }


_DISPATCH = {
    "classify": cmd_classify,
    "product": cmd_product,
    "mixture": cmd_mixture,
    "risk": cmd_risk,
    "mvec": cmd_mvec,
    "matrix": cmd_matrix,
}


# ---------------------------------------------------------------------------
# entry point


def _parse_seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heavytail", description="Heavy-tail class diagnostics and closure checks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--seed", required=True, type=_parse_seed, help="unsigned 64-bit master seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $HEAVYTAIL_WORKERS or 1)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    return p


def _fail(kind: str, exc: BaseException) -> int:
    msg = str(exc).replace("\n", " ")
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": msg}) + "\n")
    return 1


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = json.loads(args.config.read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        tol, grid = _settings(cfg)
        workers = resolve_workers(args.workers)
        r = Run(args.command, args.seed, workers, tol, grid)
        _DISPATCH[args.command](cfg, r, tol, grid, args.seed)
        r.write(args.out)
    except (ConfigError, DomainError, KeyError, TypeError, json.JSONDecodeError) as exc:
        return _fail("config", exc)
    except OSError as exc:
        return _fail("io", exc)
    return r.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
