"""Observed convergence orders on the harmonic oscillator for every one-step scheme.

Usage: python scripts/order_study.py [--time 10] [--taus 0.2,0.1,0.05,0.025]
"""

import argparse

import numpy as np

from dvarint.cli import RunConfig, order_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--time", type=float, default=10.0)
    ap.add_argument("--taus", default="0.2,0.1,0.05,0.025")
    args = ap.parse_args()
    taus = [float(t) for t in args.taus.split(",")]
    print(f"{'scheme':>15} " + " ".join(f"{t:>10g}" for t in taus[1:]))
    for scheme in ("explicit_euler", "midpoint", "canonical", "del", "order4"):
        rows, err = order_study(RunConfig(scheme=scheme, taus=taus, time=args.time))
        if err is not None:
            print(f"{scheme:>15} failed: {err}")
            continue
        orders = np.array([r[3] for r in rows[1:]])
        print(f"{scheme:>15} " + " ".join(f"{o:10.4f}" for o in orders))


if __name__ == "__main__":
    main()
