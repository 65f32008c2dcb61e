import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argoc import clustering as cl
from argoc.synth import demo_block_panel
from oracles import silhouette_bruteforce, upgma_bruteforce

FOUR = np.array([[0.0, 0.1, 0.8, 0.9],
                 [0.1, 0.0, 0.85, 0.95],
                 [0.8, 0.85, 0.0, 0.2],
                 [0.9, 0.95, 0.2, 0.0]])


def _dyadic(n, rng, denom=8):
    d = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    d[iu] = rng.integers(1, 2 * denom, size=len(iu[0])) / denom
    return d + d.T


@st.composite
def distance_matrices(draw, n_min=2, n_max=7):
    n = draw(st.integers(n_min, n_max))
    vals = draw(st.lists(st.integers(1, 15), min_size=n * (n - 1) // 2,
                         max_size=n * (n - 1) // 2))
    d = np.zeros((n, n))
    d[np.triu_indices(n, 1)] = np.array(vals) / 8
    return d + d.T


# -- correlation distance -------------------------------------------------------

def test_correlation_distance_examples():
    a = np.array([1.0, 2.0, 3.0])
    dm = cl.correlation_distance(np.column_stack([a, a, -a, [1.0, 2.0, 4.0]]))
    assert dm.d[0, 1] == pytest.approx(0.0, abs=1e-15)
    assert dm.d[0, 2] == pytest.approx(2.0, abs=1e-15)
    assert dm.d[0, 3] == pytest.approx(0.018019, abs=1e-6)


def test_constant_series_reported():
    X = np.column_stack([[1.0, 2.0, 3.0, 5.0], [4.0, 4.0, 4.0, 4.0], [2.0, 1.0, 0.0, 3.0]])
    dm = cl.correlation_distance(X)
    assert dm.constant_series == (1,)
    assert dm.d[1, 0] == 1.0 and dm.d[1, 2] == 1.0
    with pytest.raises(ValueError):
        cl.correlation_distance(X[:2])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 50), st.floats(-100, 100))
def test_correlation_distance_affine_invariant(seed, scale, shift):
    X = np.random.default_rng(seed).normal(size=(20, 4))
    Y = X.copy()
    Y[:, 1] = scale * Y[:, 1] + shift
    a, b = cl.correlation_distance(X).d, cl.correlation_distance(Y).d
    assert np.allclose(a, b, atol=1e-12)
    assert np.array_equal(a, a.T) and np.all(np.diag(a) == 0)
    assert np.all((a >= 0) & (a <= 2))


def test_distance_matrix_validation():
    with pytest.raises(ValueError):
        cl.DistanceMatrix(np.array([[0.0, 1.0], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        cl.DistanceMatrix(np.array([[0.0, 3.0], [3.0, 0.0]]))
    with pytest.raises(ValueError):
        cl.DistanceMatrix(np.array([[0.1, 1.0], [1.0, 0.0]]))


# -- average linkage --------------------------------------------------------------

def test_four_point_example():
    part = cl.average_linkage(FOUR, 2)
    assert part.groups() == [[0, 1], [2, 3]]
    assert part.group_sizes == (2, 2)
    assert [m.height for m in part.merge_log] == [0.1, 0.2]


def test_k_extremes():
    part = cl.average_linkage(FOUR, 4)
    assert part.assignments == (1, 2, 3, 4) and part.merge_log == ()
    part = cl.average_linkage(FOUR, 1)
    assert part.assignments == (1, 1, 1, 1)
    with pytest.raises(ValueError):
        cl.average_linkage(FOUR, 0)
    with pytest.raises(ValueError):
        cl.average_linkage(FOUR, 5)


def test_duplicates_share_group(rng):
    X = rng.normal(size=(30, 5))
    X[:, 3] = X[:, 1]
    dm = cl.correlation_distance(X)
    for K in range(1, 5):
        part = cl.average_linkage(dm, K)
        assert part.assignments[1] == part.assignments[3]


def test_matches_bruteforce_on_random_dyadic(rng):
    for _ in range(60):
        n = int(rng.integers(2, 7))
        d = _dyadic(n, rng)
        ref = upgma_bruteforce(d)
        got = cl.build_dendrogram(d).merges
        assert [(m.left, m.right, m.height) for m in got] == [(l, r, float(h)) for l, r, h in ref]


def test_tie_rule_prefers_least_member():
    d = np.full((4, 4), 0.5)
    np.fill_diagonal(d, 0)
    merges = cl.build_dendrogram(d).merges
    assert merges[0].left == (0,) and merges[0].right == (1,)
    assert merges[1].left == (0, 1) and merges[1].right == (2,)


def test_group_ids_follow_smallest_member():
    d = np.array([[0, .9, .1, .9], [.9, 0, .9, .2], [.1, .9, 0, .9], [.9, .2, .9, 0]])
    part = cl.average_linkage(d, 2, ["a", "b", "c", "d"])
    assert part.assignments == (1, 2, 1, 2)
    assert part.group_of("d") == 2
    assert part.restricted(["d", "a", "c"]) == [[1, 2], [0]]
    with pytest.raises(KeyError):
        part.restricted(["zz"])


@settings(max_examples=50, deadline=None)
@given(distance_matrices())
def test_cut_refinement(d):
    tree = cl.build_dendrogram(d)
    n = d.shape[0]
    prev = tree.cut(1)
    for K in range(2, n + 1):
        cur = tree.cut(K)
        for g in cur.groups():
            assert len({prev.assignments[i] for i in g}) == 1
        prev = cur


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_permutation_invariance_without_ties(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, n))
    d = cl.correlation_distance(X).d
    perm = rng.permutation(n)
    for K in range(1, n + 1):
        a = cl.average_linkage(d, K)
        b = cl.average_linkage(d[np.ix_(perm, perm)], K)
        sa = {frozenset(g) for g in a.groups()}
        sb = {frozenset(int(perm[i]) for i in g) for g in b.groups()}
        assert sa == sb


def test_block_fixture_recovers_pairs():
    sp = demo_block_panel(200, seed=3)
    dm = cl.correlation_distance(sp.panel.transformed().predictors)
    part = cl.average_linkage(dm, 3, sp.panel.names)
    assert part.assignments == sp.partition.assignments


def test_monotone_heights_on_metric(rng):
    X = rng.normal(size=(40, 9))
    tree = cl.build_dendrogram(cl.correlation_distance(X))
    assert tree.monotonicity_violations() == []


# -- diagnostics -------------------------------------------------------------------

def test_within_group_variance_examples():
    singles = cl.ClusterPartition((1, 2, 3, 4), tuple("abcd"))
    assert cl.within_group_variance(singles, FOUR) == 0.0
    d2 = np.array([[0.0, 0.4], [0.4, 0.0]])
    assert cl.within_group_variance(cl.ClusterPartition((1, 1), ("a", "b")), d2) == pytest.approx(0.16)
    assert cl.within_group_variance(cl.average_linkage(FOUR, 2), FOUR) == pytest.approx(0.05)


@settings(max_examples=50, deadline=None)
@given(distance_matrices())
def test_within_group_variance_nonincreasing(d):
    rows = cl.scan_cluster_counts(d, 1, d.shape[0])
    v = [r.within_group_variance for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(v, v[1:]))
    assert v[-1] == 0.0


def test_silhouette_examples(rng):
    d = np.array([[0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 0, 0], [1, 1, 0, 0]], dtype=float)
    assert cl.silhouette_score(cl.average_linkage(d, 2), d) == pytest.approx(1.0, abs=1e-9)
    # K = n - 1 with one merged pair of identical points
    d = np.array([[0, 0, .7, .4], [0, 0, .7, .4], [.7, .7, 0, .5], [.4, .4, .5, 0]])
    part = cl.average_linkage(d, 3)
    assert cl.silhouette_score(part, d) == pytest.approx(
        silhouette_bruteforce(part.assignments, d), abs=1e-12)
    for _ in range(20):
        X = rng.normal(size=(15, 6))
        d = cl.correlation_distance(X).d
        for K in range(2, 6):
            part = cl.average_linkage(d, K)
            assert cl.silhouette_score(part, d) == pytest.approx(
                silhouette_bruteforce(part.assignments, d), abs=1e-10)
    with pytest.raises(ValueError):
        cl.silhouette_score(cl.average_linkage(d, 1), d)
    with pytest.raises(ValueError):
        cl.silhouette_score(cl.average_linkage(d, 6), d)


def test_scan_four_point_table():
    rows = cl.scan_cluster_counts(FOUR, 1, 4)
    assert [r.K for r in rows] == [1, 2, 3, 4]
    wgv = [r.within_group_variance for r in rows]
    assert wgv == pytest.approx([0.01 + 0.04 + 0.64 + 0.81 + 0.7225 + 0.9025, 0.05, 0.01, 0.0])
    s2 = (0.75 / 0.85 + 0.8 / 0.9 + 0.625 / 0.825 + 0.725 / 0.925) / 4
    s3 = (0.7 / 0.8 + 0.75 / 0.85) / 4
    assert rows[0].silhouette is None and rows[3].silhouette is None
    assert rows[1].silhouette == pytest.approx(s2, abs=1e-12)
    assert rows[2].silhouette == pytest.approx(s3, abs=1e-12)
    single = cl.scan_cluster_counts(FOUR, 4, 4)
    assert len(single) == 1 and single[0].within_group_variance == 0.0


def test_artifacts_round_trip(tmp_path):
    part = cl.average_linkage(FOUR, 2, ["w", "x", "y", "z"])
    cl.write_partition_csv(tmp_path / "p.csv", part)
    back = cl.read_partition_csv(tmp_path / "p.csv")
    assert back.assignments == part.assignments and back.labels == part.labels
    cl.write_dendrogram_jsonl(tmp_path / "d.jsonl", cl.build_dendrogram(FOUR), part.labels)
    lines = (tmp_path / "d.jsonl").read_text().splitlines()
    assert lines[0] == '{"left": ["w"], "right": ["x"], "height": 0.1}'
    assert len(lines) == 3
