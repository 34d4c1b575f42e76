#!/usr/bin/env python3
"""Joint-tail checks on two-dimensional common-factor and MRV models."""

import argparse
import math

import numpy as np

from heavytail import Pareto, StoppingTime, UniformPos
from heavytail import multivar as mv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=1_000_000)
    args = ap.parse_args()

    cf = mv.common_factor(Pareto(2.0, 1.0), (1.0, 1.0))
    ratio, _ = cf.joint_ratio((0.5, 0.5), (1, 1), cf.default_xs(), "b=(.5,.5)")
    print(f"common factor joint ratio at b=(0.5,0.5): {ratio.limit_estimate:.4f}")
    print("check_Dn:", mv.check_Dn(cf).verdict, "  check_PDn:", mv.check_PDn(cf).verdict)
    sp = mv.scalar_product(cf, UniformPos(0.0, 1.0))
    print("scalar product by U(0,1), check_Dn:", mv.check_Dn(sp).verdict)

    other = mv.common_factor(Pareto(2.0, 1.0), (1.0, 1.0))
    vs = mv.vector_sum(cf, other)
    vs.mc_samples, vs.mc_seed = args.samples, args.seed
    xs = vs.default_xs()
    est = vs.joint_tail((1, 1), xs)
    lo, hi = vs.sandwich((1, 1), xs)
    inside = (est.value >= lo - 3 * est.stderr) & (est.value <= hi + 3 * est.stderr)
    print(f"vector sum sandwiched at {int(inside.sum())}/{xs.size} grid points")

    stopped = mv.project(mv.stopped_vector_sum(cf, StoppingTime.uniform([1, 2])), 1)
    x = 1e4
    print(f"stopped sum tail ratio at x=1e4: {stopped.tail(x) / Pareto(2.0, 1.0).tail(x):.4f}")

    mrv = mv.mrv_model(2.0, np.array([[1.0, 1.0]]) / math.sqrt(2), [1.0])
    rep = mv.check_mrv_in_Dn(mrv)
    print(f"MRV homogeneity ratio {rep.homogeneity.limit_estimate:.4f}, confirmed={rep.confirmed}")


if __name__ == "__main__":
    main()
