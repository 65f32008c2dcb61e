"""Average-linkage (UPGMA) clustering of search-term series on correlation distance."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SchemaError


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray
    constant_series: tuple[int, ...] = ()

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if np.any(d < 0) or np.any(d > 2):
            raise ValueError("correlation distances lie in [0, 2]")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def correlation_distance(series) -> DistanceMatrix:
    """``1 - pearson`` between the columns of ``series`` (weeks x terms).

    Constant columns have undefined correlation; they get distance 1 to every
    other column and are listed in ``constant_series``.
    """
    X = np.asarray(series, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a weeks x terms matrix")
    if X.shape[0] < 3:
        raise ValueError("correlation distance needs at least 3 weeks")
    Xc = X - X.mean(axis=0)
    norms = np.sqrt((Xc ** 2).sum(axis=0))
    const = norms <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    safe = np.where(const, 1.0, norms)
    U = Xc / safe
    R = U.T @ U
    R[const, :] = 0.0
    R[:, const] = 0.0
    d = 1.0 - np.clip(R, -1.0, 1.0)
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d, tuple(int(i) for i in np.flatnonzero(const)))


@dataclass(frozen=True)
class Merge:
    left: tuple[int, ...]
    right: tuple[int, ...]
    height: float


@dataclass(frozen=True)
class Dendrogram:
    """Full UPGMA merge sequence down to one cluster."""

    n: int
    merges: tuple[Merge, ...]

    def monotonicity_violations(self) -> list[int]:
        h = [m.height for m in self.merges]
        return [i for i in range(1, len(h)) if h[i] < h[i - 1]]

    def cut(self, K: int, labels: Sequence[str] | None = None) -> "ClusterPartition":
        if not 1 <= K <= self.n:
            raise ValueError(f"K must lie in 1..{self.n}")
        clusters = {i: (i,) for i in range(self.n)}
        for mg in self.merges[: self.n - K]:
            a, b = mg.left[0], mg.right[0]
            ka = next(k for k, v in clusters.items() if a in v)
            kb = next(k for k, v in clusters.items() if b in v)
            clusters[min(ka, kb)] = tuple(sorted(clusters[ka] + clusters[kb]))
            del clusters[max(ka, kb)]
        groups = sorted(clusters.values(), key=lambda g: g[0])
        assignments = np.empty(self.n, dtype=int)
        for gid, g in enumerate(groups, start=1):
            assignments[list(g)] = gid
        return ClusterPartition(
            assignments=tuple(int(a) for a in assignments),
            merge_log=self.merges[: self.n - K],
            labels=tuple(labels) if labels is not None else tuple(str(i) for i in range(self.n)),
            monotonicity_violations=tuple(self.monotonicity_violations()),
        )


@dataclass(frozen=True)
class ClusterPartition:
    """Group ids ``1..K`` for each series, numbered by smallest member index."""

    assignments: tuple[int, ...]
    labels: tuple[str, ...]
    merge_log: tuple[Merge, ...] = ()
    monotonicity_violations: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.labels) != len(self.assignments):
            raise ValueError("one label per series")
        ids = sorted(set(self.assignments))
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("group ids must be 1..K")

    @property
    def K(self) -> int:
        return max(self.assignments) if self.assignments else 0

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(self.assignments.count(k) for k in range(1, self.K + 1))

    def groups(self) -> list[list[int]]:
        out = [[] for _ in range(self.K)]
        for i, g in enumerate(self.assignments):
            out[g - 1].append(i)
        return out

    def group_of(self, label: str) -> int:
        return self.assignments[self.labels.index(label)]

    def restricted(self, labels: Sequence[str]) -> list[list[int]]:
        """Groups as index lists into ``labels`` (all of which must be covered).

        Empty groups are dropped; group order follows the partition's ids.
        """
        lookup = dict(zip(self.labels, self.assignments))
        missing = [l for l in labels if l not in lookup]
        if missing:
            raise KeyError(f"partition does not cover terms {missing[:5]}")
        out = {}
        for j, l in enumerate(labels):
            out.setdefault(lookup[l], []).append(j)
        return [out[k] for k in sorted(out)]


def build_dendrogram(dm: DistanceMatrix | np.ndarray) -> Dendrogram:
    """UPGMA from singletons to a single cluster.

    Cluster-pair distances are kept as sums of member distances, so the
    average is ``sum / (|A| |B|)``.  Ties go to the pair whose union has the
    least smallest member, then the least other-cluster smallest member.
    """
    d = dm.d if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    n = d.shape[0]
    S = d.astype(float).copy()
    members = {i: (i,) for i in range(n)}
    active = list(range(n))
    merges = []
    while len(active) > 1:
        best = None
        for ai, a in enumerate(active):
            na = len(members[a])
            for b in active[ai + 1:]:
                avg = S[a, b] / (na * len(members[b]))
                lo, hi = sorted((members[a][0], members[b][0]))
                key = (avg, lo, hi)
                if best is None or key < best[0]:
                    best = (key, a, b)
        (avg, _, _), a, b = best
        if members[a][0] > members[b][0]:
            a, b = b, a
        merges.append(Merge(members[a], members[b], float(avg)))
        for c in active:
            if c not in (a, b):
                S[a, c] = S[c, a] = S[a, c] + S[b, c]
        members[a] = tuple(sorted(members[a] + members[b]))
        del members[b]
        active.remove(b)
    return Dendrogram(n, tuple(merges))


def average_linkage(dm: DistanceMatrix | np.ndarray, K: int,
                    labels: Sequence[str] | None = None) -> ClusterPartition:
    return build_dendrogram(dm).cut(K, labels)


def within_group_variance(partition: ClusterPartition, dm) -> float:
    """Sum over groups of the within-group pairwise squared distances.

    Singletons contribute nothing, and the value never increases when a
    dendrogram cut is refined.
    """
    d = dm.d if isinstance(dm, DistanceMatrix) else np.asarray(dm)
    total = 0.0
    for g in partition.groups():
        if len(g) > 1:
            sub = d[np.ix_(g, g)]
            total += float(np.sum(np.triu(sub, 1) ** 2))
    return total


def silhouette_score(partition: ClusterPartition, dm) -> float:
    d = dm.d if isinstance(dm, DistanceMatrix) else np.asarray(dm)
    n, K = partition.n, partition.K
    if not 2 <= K <= n - 1:
        raise ValueError(f"silhouette needs 2 <= K <= n-1, got K={K}, n={n}")
    lab = np.asarray(partition.assignments)
    s = np.zeros(n)
    for i in range(n):
        own = lab == lab[i]
        if own.sum() == 1:
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(d[i, lab == k].mean() for k in range(1, K + 1) if k != lab[i])
        top = max(a, b)
        s[i] = 0.0 if top == 0 else (b - a) / top
    return float(s.mean())


@dataclass(frozen=True)
class ScanRow:
    K: int
    within_group_variance: float
    silhouette: float | None


def scan_cluster_counts(dm, k_min: int, k_max: int) -> list[ScanRow]:
    """Diagnostics for every K in ``k_min..k_max`` from one dendrogram."""
    d = dm.d if isinstance(dm, DistanceMatrix) else np.asarray(dm)
    n = d.shape[0]
    if not 1 <= k_min <= k_max <= n:
        raise ValueError("need 1 <= k_min <= k_max <= n")
    tree = build_dendrogram(d)
    rows = []
    for K in range(k_min, k_max + 1):
        part = tree.cut(K)
        sil = silhouette_score(part, d) if 2 <= K <= n - 1 else None
        rows.append(ScanRow(K, within_group_variance(part, d), sil))
    return rows


# --------------------------------------------------------------------------
# artifacts

def write_partition_csv(path, partition: ClusterPartition) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "group_id"])
        for label, g in zip(partition.labels, partition.assignments):
            w.writerow([label, g])


def read_partition_csv(path) -> ClusterPartition:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["term", "group_id"]:
        raise SchemaError(path, [(1, "expected header 'term,group_id'")])
    labels, ids, problems = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            problems.append((ln, f"expected 2 fields, got {len(row)}"))
            continue
        try:
            ids.append(int(row[1]))
        except ValueError:
            problems.append((ln, f"non-integer group id {row[1]!r}"))
            continue
        labels.append(row[0])
    if problems:
        raise SchemaError(path, problems)
    try:
        return ClusterPartition(tuple(ids), tuple(labels))
    except ValueError as exc:
        raise SchemaError(path, [(0, str(exc))]) from None


def write_dendrogram_jsonl(path, tree: Dendrogram, labels: Sequence[str] | None = None) -> None:
    name = (lambda i: labels[i]) if labels is not None else (lambda i: i)
    with Path(path).open("w") as fh:
        for mg in tree.merges:
            rec = {"left": [name(i) for i in mg.left], "right": [name(i) for i in mg.right],
                   "height": mg.height}
            fh.write(json.dumps(rec) + "\n")


def write_scan_csv(path, rows: list[ScanRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "within_group_variance", "silhouette"])
        for r in rows:
            w.writerow([r.K, repr(r.within_group_variance),
                        "" if r.silhouette is None else repr(r.silhouette)])
