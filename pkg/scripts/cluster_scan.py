"""Within-group variance and silhouette across cluster counts for a predictor panel.

    python3 scripts/cluster_scan.py                       # synthetic 10 x 3 panel
    python3 scripts/cluster_scan.py --predictors x.csv --k-max 20
"""
import argparse

from argoc import clustering as cl
from argoc import synth
from argoc.timeseries import log_volume_array, read_predictor_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--predictors", help="date,term1,... CSV of raw search volumes")
    ap.add_argument("--k-min", type=int, default=1)
    ap.add_argument("--k-max", type=int, default=15)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.predictors:
        _, names, V = read_predictor_csv(args.predictors)
    else:
        sp = synth.make_panel(synth.SynthConfig(n_weeks=208), seed=args.seed)
        names, V = sp.panel.names, sp.panel.predictors
    dm = cl.correlation_distance(log_volume_array(V, args.eps))
    rows = cl.scan_cluster_counts(dm, args.k_min, min(args.k_max, len(names)))
    print(" K  within-group variance  silhouette")
    for r in rows:
        sil = "--" if r.silhouette is None else f"{r.silhouette:.4f}"
        print(f"{r.K:>2}  {r.within_group_variance:>21.4f}  {sil:>10}")


if __name__ == "__main__":
    main()
