"""Cross-regional BLP boosting on the Gaussian multi-resolution fixture.

    python3 scripts/regional_boost.py --regions 10 --weeks 500
"""
import argparse

import numpy as np

from argoc import synth
from argoc.boost import BoostInputs, boost_rolling


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--regions", type=int, default=10)
    ap.add_argument("--weeks", type=int, default=500, help="evaluation weeks")
    ap.add_argument("--window", type=int, default=104)
    ap.add_argument("--shrinkage", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    fx = synth.make_multires(args.weeks + args.window + 2, args.regions, args.seed)
    truth = fx.truth[1:]
    inp = BoostInputs(fx.weeks[1:], fx.raw[1:], fx.national[1:], fx.truth[:-1])
    run = boost_rolling(inp, truth, inp.weeks[-args.weeks:], args.window, args.shrinkage)
    y = truth[-args.weeks:]
    mse_raw = ((run.raw - y) ** 2).mean(axis=0)
    mse_boost = ((run.boosted - y) ** 2).mean(axis=0)
    print("region  raw MSE    boosted MSE  ratio")
    for r, (a, b) in enumerate(zip(mse_raw, mse_boost)):
        print(f"{inp.regions[r]:<7} {a:.6f}   {b:.6f}     {b / a:.3f}")
    print(f"boosted better in {int(np.sum(mse_boost <= mse_raw))}/{args.regions} regions")


if __name__ == "__main__":
    main()
