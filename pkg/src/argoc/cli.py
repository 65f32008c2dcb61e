"""Command-line front end.

Subcommands: ``validate``, ``synth``, ``cluster``, ``nowcast``, ``intervals``,
``evaluate`` and ``boost``.  Every command reads an optional ``--config`` file
whose values individual flags override.

Exit codes: 0 ok, 1 usage, 2 input schema, 3 empty result, 4 internal
invariant breach.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import boost as bst
from . import clustering as cl
from . import config as cfgmod
from . import evaluation as ev
from . import nowcast as nc
from . import svg
from . import synth
from . import uncertainty as un
from .errors import EmptyOverlapError, InvariantError, SchemaError
from .timeseries import (WeekStamp, load_panel, log_volume_array, read_availability_csv,
                         read_predictor_csv, read_target_csv, week_range, write_availability_csv,
                         write_predictor_csv, write_target_csv)

log = logging.getLogger("argoc")

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_EMPTY, EXIT_INVARIANT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# config plumbing

def _csv_tuple(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run config overrides")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--target")
    g.add_argument("--predictors")
    g.add_argument("--availability")
    g.add_argument("--partition", dest="partitions", action="append",
                   help="partition CSV (repeat for several vocabulary vintages)")
    g.add_argument("--external", action="append", help="label=path of an external prediction CSV")
    g.add_argument("--eps", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--k-min", type=int)
    g.add_argument("--k-max", type=int)
    g.add_argument("--cluster-end")
    g.add_argument("--cluster-raw", dest="cluster_log", action="store_const", const=False,
                   help="cluster raw volumes instead of ln(v + eps)")
    g.add_argument("--recluster-every", type=int)
    g.add_argument("--methods", type=_csv_tuple, help="comma-separated method kinds")
    g.add_argument("--N", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--folds", type=int)
    g.add_argument("--n-lambda", type=int)
    g.add_argument("--ratio", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--cv-every", type=int)
    g.add_argument("--no-standardize", dest="standardize", action="store_const", const=False)
    g.add_argument("--start")
    g.add_argument("--end")
    g.add_argument("--level", type=float)
    g.add_argument("--reps", type=int)
    g.add_argument("--q", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    g.add_argument("-v", "--verbose", action="store_true")


def resolve_config(args) -> cfgmod.RunConfig:
    base = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    over = {f: getattr(args, f, None) for f in cfgmod._FIELDS}
    for key in ("partitions", "external"):
        if over.get(key) is not None:
            over[key] = tuple(over[key])
    try:
        return base.override(**over)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require(cfg, *names):
    missing = [n for n in names if not getattr(cfg, n)]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join(missing)}")
    absent = cfg.missing_paths()
    if absent:
        raise SchemaError(absent[0], [(0, "file not found")])


def _week(text: str, what: str) -> WeekStamp:
    try:
        return WeekStamp.parse(text)
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() else "-" for c in label.lower())


def _out(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# validate

def cmd_validate(cfg) -> int:
    checks = [("target", cfg.target, read_target_csv), ("predictors", cfg.predictors, read_predictor_csv),
              ("availability", cfg.availability, read_availability_csv)]
    checks += [("partition", p, cl.read_partition_csv) for p in cfg.partitions]
    checks += [("external", p, nc.read_run_csv) for p in cfg.external_map().values()]
    checks = [c for c in checks if c[1]]
    if not checks:
        raise UsageError("nothing to validate; pass --target, --predictors, ...")
    failed = 0
    for what, path, reader in checks:
        if not Path(path).exists():
            print(f"{path}:0: {what} file not found", file=sys.stderr)
            failed += 1
            continue
        try:
            reader(path)
        except SchemaError as exc:
            print(str(exc), file=sys.stderr)
            failed += 1
        else:
            print(f"ok {what} {path}")
    if not failed and cfg.target and cfg.predictors:
        try:
            load_panel(cfg.target, cfg.predictors, cfg.eps)
        except (SchemaError, ValueError) as exc:
            print(str(exc), file=sys.stderr)
            failed += 1
    return EXIT_SCHEMA if failed else EXIT_OK


# --------------------------------------------------------------------------
# synth

def cmd_synth(cfg, kind: str, weeks: int, late_terms: int) -> int:
    if kind == "demo":
        sp = synth.demo_block_panel(weeks, cfg.seed)
    else:
        sp = synth.make_panel(synth.SynthConfig(n_weeks=weeks), cfg.seed)
    out = _out(cfg)
    panel = sp.panel
    write_target_csv(out / "target.csv", panel.weeks, panel.target)
    write_predictor_csv(out / "predictors.csv", panel.weeks, panel.names, panel.predictors)
    cl.write_partition_csv(out / "true_partition.csv", sp.partition)
    if late_terms:
        if not 0 < late_terms < panel.p:
            raise UsageError("--late-terms must leave at least one early term")
        late = panel.weeks[len(panel.weeks) // 2]
        avail = {n: (late if j >= panel.p - late_terms else panel.weeks[0])
                 for j, n in enumerate(panel.names)}
        write_availability_csv(out / "availability.csv", avail)
    print(f"wrote {panel.n_weeks} weeks x {panel.p} terms to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# cluster

def _vintages(weeks, names, availability, first_pred=None, every=0
              ) -> list[tuple[WeekStamp, tuple[str, ...]]]:
    """Vocabulary vintages, plus a fresh one every ``every`` weeks after ``first_pred``."""
    first = weeks[0]
    starts = {max(availability.get(n, first), first) for n in names}
    if every and first_pred is not None:
        starts |= set(weeks[weeks.index(first_pred)::every][1:]) if first_pred in weeks else set()
    return [(v, tuple(n for n in names if availability.get(n, first) <= v)) for v in sorted(starts)]


def run_clustering(cfg, out: Path | None) -> list[tuple[WeekStamp, cl.ClusterPartition]]:
    weeks, names, X = read_predictor_csv(cfg.predictors)
    if not weeks:
        raise SchemaError(cfg.predictors, [(2, "no data rows")])
    availability = read_availability_csv(cfg.availability) if cfg.availability else {}
    fixed_end = _week(cfg.cluster_end, "cluster_end") if cfg.cluster_end else None
    series = log_volume_array(X, cfg.eps) if cfg.cluster_log else X
    results = []
    vintages = _vintages(weeks, names, availability, weeks[0].shift(cfg.N + cfg.m),
                         cfg.recluster_every)
    for start, terms in vintages:
        # all search history before the vintage's first prediction week
        first_pred = max(start, weeks[0].shift(cfg.N + cfg.m))
        end = fixed_end or first_pred.shift(-1)
        rows = [i for i, w in enumerate(weeks) if w <= end]
        if len(rows) < 3:
            raise UsageError(f"vintage {start}: need at least 3 weeks of search data before {end}")
        cols = [names.index(t) for t in terms]
        dm = cl.correlation_distance(series[np.ix_(rows, cols)])
        n = len(terms)
        part = cl.average_linkage(dm, min(cfg.k, n), terms)
        k_max = cfg.k_max or max(n - 1, 1)
        k_min = min(cfg.k_min, k_max)
        scan = cl.scan_cluster_counts(dm, k_min, min(k_max, n))
        results.append((start, part))
        if out is not None:
            cl.write_partition_csv(out / f"partition_{start}.csv", part)
            cl.write_dendrogram_jsonl(out / f"dendrogram_{start}.jsonl",
                                      cl.build_dendrogram(dm), list(terms))
            cl.write_scan_csv(out / f"scan_{start}.csv", scan)
        if part.monotonicity_violations:
            log.warning("vintage %s: non-monotone merge heights at steps %s",
                        start, list(part.monotonicity_violations))
    return results


def cmd_cluster(cfg) -> int:
    _require(cfg, "predictors")
    read_predictor_csv(cfg.predictors)      # schema errors before any output exists
    if cfg.availability:
        read_availability_csv(cfg.availability)
    results = run_clustering(cfg, _out(cfg))
    for start, part in results:
        print(f"vintage {start}: {part.n} terms in {part.K} groups")
    return EXIT_OK


# --------------------------------------------------------------------------
# nowcast

def _schedule(cfg, panel, availability, out):
    if cfg.partitions:
        entries = []
        for path in cfg.partitions:
            part = cl.read_partition_csv(path)
            unknown = [t for t in part.labels if t not in panel.names]
            if unknown:
                raise SchemaError(path, [(0, f"terms not in the predictor file: {unknown[:5]}")])
            start = max(max(availability.get(t, panel.weeks[0]) for t in part.labels),
                        panel.weeks[0])
            entries.append((start, part))
        return nc.PartitionSchedule(tuple(entries))
    return nc.PartitionSchedule(tuple(run_clustering(cfg, out)))


def _spec(cfg, kind):
    return nc.MethodSpec(kind, m=cfg.m, N=cfg.N, alpha=cfg.alpha, folds=cfg.folds,
                         n_lambda=cfg.n_lambda, ratio=cfg.ratio, tol=cfg.tol,
                         max_iter=cfg.max_iter, cv_every=cfg.cv_every, standardize=cfg.standardize)


def _span(cfg, panel) -> list[WeekStamp]:
    first = panel.weeks[0].shift(cfg.N + cfg.m)
    start = _week(cfg.start, "start") if cfg.start else first
    end = _week(cfg.end, "end") if cfg.end else panel.weeks[-1]
    return week_range(start, end)


def _check_run(run: nc.NowcastRun):
    p = run.predictions
    if len(p) and not (np.all(np.isfinite(p)) and np.all((p > 0) & (p < 100))):
        raise InvariantError(f"{run.label}: non-finite or out-of-range predictions")
    if len(run.weeks) != len(set(run.weeks)):
        raise InvariantError(f"{run.label}: duplicate prediction weeks")


def cmd_nowcast(cfg, jobs: int) -> int:
    _require(cfg, "target", "predictors")
    if "var1" in cfg.methods:
        raise UsageError("var1 needs several jointly observed series; use the Python API")
    panel = load_panel(cfg.target, cfg.predictors, cfg.eps)
    availability = read_availability_csv(cfg.availability) if cfg.availability else {}
    for path in cfg.partitions:
        cl.read_partition_csv(path)
    out = _out(cfg)
    needs_groups = any(k in ("argo_c", "exo_only_argo_c") for k in cfg.methods)
    schedule = _schedule(cfg, panel, availability, out) if needs_groups or cfg.partitions else None
    span = _span(cfg, panel)
    if not span or span[-1] < panel.weeks[0] or span[0] > panel.weeks[-1]:
        log.warning("span %s..%s lies outside the data (%s..%s)",
                    cfg.start or "-", cfg.end or "-", panel.weeks[0], panel.weeks[-1])
    truth = dict(zip(panel.weeks, panel.target))
    files, skipped = [], []
    for kind in cfg.methods:
        spec = _spec(cfg, kind)
        if kind == "naive":
            run = nc.nowcast_naive(panel, span)
        elif kind == "argo_lasso":
            run = nc.nowcast_argo(panel, span, spec, availability, jobs, cfg.seed)
        else:
            run = nc.nowcast_argo_c(panel, schedule, span, spec, availability, jobs, cfg.seed)
        _check_run(run)
        slug = _slug(run.label)
        nc.write_run_csv(out / f"run_{slug}.csv", run, truth)
        files.append(f"run_{slug}.csv")
        skipped += [(run.label, str(w), why) for w, why in run.skipped]
        if run.method.penalized:
            nc.write_residuals_csv(out / f"residuals_{slug}.csv", run)
            iv = un.build_intervals(run, cfg.level, cfg.reps, cfg.q, cfg.seed)
            un.write_interval_csv(out / f"intervals_{slug}.csv", iv)
            files += [f"residuals_{slug}.csv", f"intervals_{slug}.csv"]
            part = schedule.entries[-1][1] if schedule else cl.ClusterPartition(
                tuple(range(1, panel.p + 1)), panel.names)
            tp = nc.extract_traceplot(run, part)
            nc.write_traceplot_csv(out / f"traceplot_{slug}.csv", tp)
            files.append(f"traceplot_{slug}.csv")
            if len(tp.weeks):
                svg.heatmap(out / f"inclusion_{slug}.svg", tp)
                files.append(f"inclusion_{slug}.svg")
        print(f"{run.label}: {len(run.weeks)} weeks predicted, {len(run.skipped)} skipped")
    with (out / "skipped.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "date", "reason"])
        w.writerows(skipped)
    # the output location is not part of a run's identity
    cfgmod.save(out / "config.ini", cfg.override(out=""))
    files += ["skipped.csv", "config.ini"]
    if schedule is not None and not cfg.partitions:
        files += sorted(p.name for p in out.glob("partition_*.csv"))
    _manifest(out, cfg, files)
    return EXIT_OK


def _manifest(out: Path, cfg, files):
    import numba
    import scipy
    manifest = {
        "config_hash": hashlib.sha256(cfgmod.dumps(cfg.override(out="")).encode()).hexdigest()[:16],
        "versions": {"argoc": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
        "files": {f: _sha(out / f) for f in sorted(set(files))},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# intervals

def cmd_intervals(cfg, residual_paths) -> int:
    if not residual_paths:
        raise UsageError("pass at least one --residuals file")
    for p in residual_paths:
        if not Path(p).exists():
            raise SchemaError(p, [(0, "file not found")])
    truth = {}
    if cfg.target:
        tw, y = read_target_csv(cfg.target)
        truth = {w: v for w, v in zip(tw, y) if not np.isnan(v)}
    out = _out(cfg)
    for path in residual_paths:
        weeks, preds, res = nc.read_residuals_csv(path)
        run = nc.NowcastRun(nc.MethodSpec("external", label=Path(path).stem), tuple(weeks), preds,
                            np.full(len(weeks), np.nan), residuals_logit=tuple(res))
        iv = un.build_intervals(run, cfg.level, cfg.reps, cfg.q, cfg.seed)
        stem = Path(path).stem.removeprefix("residuals_")
        un.write_interval_csv(out / f"intervals_{stem}.csv", iv)
        msg = f"{stem}: {len(iv.weeks)} intervals"
        if truth:
            msg += f", coverage {un.coverage(iv, truth):.4f}"
        print(msg)
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate

def _parse_slice(text: str) -> ev.PeriodSlice:
    try:
        name, rng = text.split("=", 1)
        a, b = rng.split(":", 1)
        return ev.PeriodSlice(name, WeekStamp.parse(a), WeekStamp.parse(b))
    except ValueError as exc:
        raise UsageError(f"bad --slice {text!r} (want name=START:END): {exc}") from None


def cmd_evaluate(cfg, run_paths, slice_texts, traceplot, digits) -> int:
    external = cfg.external_map()
    if not run_paths and not external:
        raise UsageError("no runs supplied; pass --run and/or --external")
    _require(cfg, "target")
    for p in run_paths:
        if not Path(p).exists():
            raise SchemaError(p, [(0, "file not found")])
    tw, y = read_target_csv(cfg.target)
    truth = dict(zip(tw, y))
    runs = [nc.read_run_csv(p) for p in run_paths]
    runs += [nc.read_run_csv(p, label) for label, p in external.items()]
    weeks = sorted({w for r in runs for w in r.weeks if w in truth and not np.isnan(truth[w])})
    if not weeks:
        raise EmptyOverlapError("runs and truth share no week")
    slices = [_parse_slice(s) for s in slice_texts] if slice_texts else (
        ev.seasons_covering(weeks) + [ev.PeriodSlice("whole", weeks[0], weeks[-1])])
    report = ev.build_report(runs, truth, slices)
    if all(c is None for c in report.cells.values()):
        raise EmptyOverlapError("no slice overlaps both runs and truth")
    out = _out(cfg)
    ev.write_report_csv(out / "report.csv", report, digits)
    svg.line_chart(out / "predictions.svg", svg.series_from_runs(runs, truth), "%ILI")
    if traceplot:
        part = cl.read_partition_csv(cfg.partitions[-1]) if cfg.partitions else None
        svg.heatmap(out / "inclusion.svg", nc.read_traceplot_csv(traceplot, part))
    for sl in slices:
        best = sorted(report.best.get(("RMSE", sl.name), ()))
        print(f"{sl.name}: best RMSE {', '.join(best) if best else '--'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# boost

def _pairs(items, what):
    out = {}
    for it in items or ():
        if "=" not in it:
            raise UsageError(f"{what} entry {it!r} must be name=path")
        k, v = it.split("=", 1)
        if not Path(v).exists():
            raise SchemaError(v, [(0, "file not found")])
        out[k] = v
    return out


def cmd_boost(cfg, national, regional, regional_targets, window, shrinkage) -> int:
    runs = _pairs(regional, "--regional")
    targets = _pairs(regional_targets, "--regional-target")
    if not national or not runs:
        raise UsageError("need --national and at least one --regional run")
    if set(runs) != set(targets):
        raise UsageError("every --regional run needs a matching --regional-target")
    if not Path(national).exists():
        raise SchemaError(national, [(0, "file not found")])
    nat = nc.read_run_csv(national)
    raw = {r: nc.read_run_csv(p, r) for r, p in runs.items()}
    truth = {}
    for r, p in targets.items():
        tw, y = read_target_csv(p)
        truth[r] = dict(zip(tw, y))
    inputs, Y = bst.assemble_inputs(raw, nat, truth)
    if not inputs.weeks:
        raise EmptyOverlapError("no week has all raw estimates and lagged truths")
    result = bst.boost_rolling(inputs, Y, list(inputs.weeks), window, shrinkage)
    if not result.weeks:
        raise EmptyOverlapError(f"fewer than {window} training weeks; nothing boosted")
    out = _out(cfg)
    bst.write_boost_csv(out / "boost.csv", result, truth)
    print(f"boosted {len(result.weeks)} weeks x {len(result.regions)} regions")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="argoc", description="Clustered search-data nowcasting of %ILI.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    s = sub.add_parser("validate", help="schema-check input files")
    _config_flags(s)
    s = sub.add_parser("synth", help="write a synthetic fixture")
    _config_flags(s)
    s.add_argument("--kind", choices=("national", "demo"), default="national")
    s.add_argument("--weeks", type=int, default=700)
    s.add_argument("--late-terms", type=int, default=0,
                   help="mark the last n terms usable only from mid-panel")
    s = sub.add_parser("cluster", help="average-linkage partitions per vocabulary vintage")
    _config_flags(s)
    s = sub.add_parser("nowcast", help="rolling nowcasts, residuals, intervals, traceplots")
    _config_flags(s)
    s = sub.add_parser("intervals", help="bootstrap intervals from residual files")
    _config_flags(s)
    s.add_argument("--residuals", action="append", default=[])
    s = sub.add_parser("evaluate", help="metric tables and plots")
    _config_flags(s)
    s.add_argument("--run", action="append", default=[])
    s.add_argument("--slice", action="append", default=[], help="name=START:END")
    s.add_argument("--traceplot")
    s.add_argument("--digits", type=int)
    s = sub.add_parser("boost", help="cross-regional BLP boosting of raw regional runs")
    _config_flags(s)
    s.add_argument("--national")
    s.add_argument("--regional", action="append")
    s.add_argument("--regional-target", action="append")
    s.add_argument("--window", type=int, default=104)
    s.add_argument("--shrinkage", type=float, default=0.2)
    return p


def _dispatch(args) -> int:
    if not args.command:
        raise UsageError("missing subcommand")
    cfg = resolve_config(args)
    if args.command == "validate":
        return cmd_validate(cfg)
    if args.command == "synth":
        if args.weeks < 10:
            raise UsageError("--weeks must be at least 10")
        return cmd_synth(cfg, args.kind, args.weeks, args.late_terms)
    if args.command == "cluster":
        return cmd_cluster(cfg)
    if args.command == "nowcast":
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
        return cmd_nowcast(cfg, args.jobs)
    if args.command == "intervals":
        return cmd_intervals(cfg, args.residuals)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, args.run, args.slice, args.traceplot, args.digits)
    if args.command == "boost":
        return cmd_boost(cfg, args.national, args.regional, args.regional_target,
                         args.window, args.shrinkage)
    raise UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return _dispatch(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SCHEMA
    except EmptyOverlapError as exc:
        print(f"empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except InvariantError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
