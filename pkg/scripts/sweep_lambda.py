#!/usr/bin/env python3
"""Solve across a grid of lambda values and tabulate energy and residuals.

The existence theory guarantees solutions for lambda in (0, lambda*); this
script probes both sides of lambda* to see how the minimizer responds.
"""

import argparse
from pathlib import Path

import numpy as np

from finslerdp import load_config, minimize
from finslerdp.cli import _run_thresholds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "default.toml"))
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0])
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    cfg = load_config(args.config)
    mesh = cfg.build_mesh()
    thr = _run_thresholds(cfg, mesh)
    print(f"lambda* = {thr.lambda_star:.8g} (attained at {thr.lambda_star_attained_at})")
    print(f"{'frac':>6} {'lambda':>12} {'J':>14} {'min u':>10} {'ratio':>8} {'weak rel':>10} conv")

    rows = []
    for frac in args.fractions:
        lam = frac * thr.lambda_star
        spec = cfg.build_problem(lam, mesh=mesh)
        rep = minimize(spec, cfg.solver, thresholds=thr)
        weak_rel = rep.weak.relative if rep.weak else np.nan
        print(
            f"{frac:6.3g} {lam:12.6g} {rep.energy.total:14.8g} {rep.min_interior:10.4g} "
            f"{rep.interiority_ratio:8.4f} {weak_rel:10.2e} {rep.converged}"
        )
        rows.append((lam, frac, rep.energy.total, rep.min_interior,
                     rep.interiority_ratio, weak_rel, int(rep.converged)))

    if args.out:
        header = "lambda,fraction,energy,min_interior,interiority_ratio,weak_relative,converged"
        np.savetxt(args.out, np.asarray(rows), delimiter=",", header=header, comments="")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
