"""Rolling ARGO-C vs ARGO vs naive on seeded synthetic national panels.

    python3 scripts/horse_race.py --seeds 3 --out horse_race
"""
import argparse
from pathlib import Path

import numpy as np

from argoc import evaluation as ev
from argoc import nowcast as nc
from argoc import synth
from argoc import uncertainty as un
from argoc.nowcast import MethodSpec, PartitionSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--weeks", type=int, default=700)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--cv-every", type=int, default=13)
    ap.add_argument("--out", default="")
    args = ap.parse_args()

    kw = dict(m=args.m, N=104, folds=5, n_lambda=20, cv_every=args.cv_every)
    rows = []
    for seed in range(args.seeds):
        sp = synth.make_panel(synth.SynthConfig(n_weeks=args.weeks), seed=seed)
        P = sp.panel.transformed()
        span = list(P.weeks[104 + args.m:])
        truth = dict(zip(sp.panel.weeks, sp.panel.target))
        runs = [nc.nowcast_argo_c(P, PartitionSchedule.single(sp.partition), span,
                                  MethodSpec("argo_c", **kw)),
                nc.nowcast_argo(P, span, MethodSpec("argo_lasso", **kw)),
                nc.nowcast_naive(P, span)]
        cov = un.coverage(un.build_intervals(runs[0], seed=seed), truth)
        rmse = [ev.rmse(r.predictions, [truth[w] for w in r.weeks]) for r in runs]
        rows.append(rmse + [cov])
        print(f"seed {seed}: RMSE ARGO-C {rmse[0]:.4f}  ARGO {rmse[1]:.4f}  "
              f"naive {rmse[2]:.4f}  95% coverage {cov:.3f}")
        if args.out:
            out = Path(args.out) / f"seed{seed}"
            out.mkdir(parents=True, exist_ok=True)
            slices = ev.seasons_covering(span)
            report = ev.build_report([(r.label, r.as_dict()) for r in runs], truth, slices)
            ev.write_report_csv(out / "report.csv", report)
    mean = np.mean(rows, axis=0)
    print(f"mean:   ARGO-C/naive {mean[0] / mean[2]:.3f}  ARGO-C/ARGO {mean[0] / mean[1]:.3f}  "
          f"coverage {mean[3]:.3f}")


if __name__ == "__main__":
    main()
