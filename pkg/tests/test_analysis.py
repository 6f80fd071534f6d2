from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_shell_counts, shell_weighted_sum, trees_by_subset_filter
from sidlalab.analysis import (
    CENSORED,
    Chi2Result,
    MonotoneTree,
    ShellProfile,
    SlimParams,
    chi_square_compare,
    cone_check,
    coverage_partition_check,
    enumerate_monotone_trees,
    extract_tree,
    first_empty_level,
    flank_bound_test,
    flank_left_distances,
    flanks,
    histogram,
    is_monotone_tree,
    ks_test_exp1,
    level_profile,
    root_heights,
    shell_identity_check,
    shell_profile,
    slim_levels,
    tail_height_estimate,
    tree_height,
    truncated_mean_height,
    wilson_interval,
)
from sidlalab.fpp import WeightField, WeightProfile, build_forest
from sidlalab.hashing import hash_uniform_vec, exp_from_uniform
from sidlalab.lattice import Dir, Edge, Vertex, Window

ROOT = Vertex(0, 0)
E_L = Edge(ROOT, Dir.LEFT)
E_R = Edge(ROOT, Dir.RIGHT)


def stretch_forest(seed=3, W=8, M=8):
    return build_forest(
        WeightField(seed=seed, profile=WeightProfile.STRETCH, window=Window(W, M))
    )


# ---------------------------------------------------------------------------
# Monotone trees and shells


def test_is_monotone_tree_examples():
    assert is_monotone_tree(ROOT, [])
    assert is_monotone_tree(ROOT, [E_R])
    assert is_monotone_tree(ROOT, [E_L, E_R])
    assert is_monotone_tree(ROOT, [E_R, Edge(Vertex(1, 1), Dir.LEFT)])
    # detached edge
    assert not is_monotone_tree(ROOT, [Edge(Vertex(1, 1), Dir.LEFT)])
    # two parents for one vertex
    assert not is_monotone_tree(
        ROOT,
        [E_L, E_R, Edge(Vertex(-1, 1), Dir.RIGHT), Edge(Vertex(1, 1), Dir.LEFT)],
    )


def test_root_only_shell():
    t = MonotoneTree(ROOT, frozenset(), False)
    sp = shell_profile(t)
    assert dict(sp.counts) == {1: 2}
    assert sp.weighted_sum() == Fraction(1)


def test_one_edge_shell():
    t = MonotoneTree(ROOT, frozenset([E_R]), False)
    assert dict(shell_profile(t).counts) == {1: 1, 2: 2}
    assert shell_identity_check(t)


def test_two_edge_shell():
    t = MonotoneTree(ROOT, frozenset([E_L, E_R]), False)
    assert dict(shell_profile(t).counts) == {2: 4}
    assert shell_identity_check(t)


def test_enumeration_counts():
    assert sum(1 for _ in enumerate_monotone_trees(0)) == 1
    assert sum(1 for _ in enumerate_monotone_trees(1)) == 3
    assert sum(1 for _ in enumerate_monotone_trees(2)) == 8


def test_enumeration_matches_subset_filter():
    mine = {t.edges for t in enumerate_monotone_trees(4)}
    assert mine == trees_by_subset_filter(4)


def test_enumeration_guard():
    with pytest.raises(ValueError):
        list(enumerate_monotone_trees(13))
    with pytest.raises(ValueError):
        list(enumerate_monotone_trees(-1))


def test_shell_identity_exact_up_to_six_edges():
    n = 0
    for t in enumerate_monotone_trees(6):
        sp = shell_profile(t)
        assert dict(sp.counts) == brute_shell_counts(t.root, t.edges)
        assert sp.weighted_sum() == Fraction(1)
        n += 1
    assert n == 569  # matches the subset-filter oracle count


def test_shell_splits_at_a_full_first_level():
    """When both root edges are present the shell is the disjoint union of
    the two child subtrees' shells, one level up."""
    for t in enumerate_monotone_trees(5):
        if E_L not in t.edges or E_R not in t.edges:
            continue
        desc = {Vertex(-1, 1): {Vertex(-1, 1)}, Vertex(1, 1): {Vertex(1, 1)}}
        for e in sorted(t.edges, key=lambda e: e.tail.y):
            for dset in desc.values():
                if e.tail in dset:
                    dset.add(Vertex(e.tail.x + e.dir.dx, e.tail.y + 1))
        split = {}
        for child, dset in desc.items():
            sub = [e for e in t.edges if e.tail in dset]
            for lvl, c in brute_shell_counts(child, sub).items():
                split[lvl] = split.get(lvl, 0) + c
        assert split == brute_shell_counts(t.root, t.edges)


def test_extract_tree_round_trip():
    fo = stretch_forest(seed=5)
    for root in fo.window.boundary():
        t = extract_tree(fo, root)
        assert is_monotone_tree(t.root, t.edges)
        for m in range(1, fo.window.M + 1):
            assert level_profile(t, root, m) == level_profile(fo, root, m)


def test_tree_height_and_censoring():
    fo = stretch_forest(seed=5, W=8, M=8)
    top_owners = set(int(x) for x in fo.root_x[8])
    for root in fo.window.boundary():
        t = extract_tree(fo, root)
        h = tree_height(t)
        if root.x in top_owners:
            assert t.censored and h is CENSORED
        else:
            assert not t.censored
            assert h == max((v.y for v in t.vertices()), default=0)
    assert repr(CENSORED) == "CENSORED"


def test_level_profile_validation():
    fo = stretch_forest()
    with pytest.raises(ValueError):
        level_profile(fo, ROOT, -1)
    with pytest.raises(ValueError):
        level_profile(fo, ROOT, fo.window.M + 1)


# ---------------------------------------------------------------------------
# Slimness, flanks, cones


def test_slim_params_validation():
    SlimParams(D=4.0)
    with pytest.raises(ValueError):
        SlimParams(D=0.0)
    with pytest.raises(ValueError):
        SlimParams(D=1.0, delta=1.5)


def test_slim_levels_thin_chain():
    chain = MonotoneTree(
        ROOT,
        frozenset(
            [E_R, Edge(Vertex(1, 1), Dir.RIGHT), Edge(Vertex(2, 2), Dir.RIGHT)]
        ),
        False,
    )
    assert slim_levels(chain, SlimParams(D=2.0)) == [1, 2, 3]
    assert slim_levels(chain, SlimParams(D=1.0)) == []  # strict on both sides


def fake_forest_one_column_tree():
    """W=4, M=2 handmade labels: tree of 0 owns (1,1) only."""
    root_x = np.array([[0, 2, 4, 6], [0, 2, 4, 6], [2, 2, 4, 6]])
    values = np.array([[0.0] * 4, [1.0, 2.0, 3.0, 4.0], [5.0] * 4])
    return SimpleNamespace(window=Window(4, 2), root_x=root_x, node_values=values)


def test_flanks_verbatim_example():
    fl = flanks(fake_forest_one_column_tree(), ROOT, 1)
    assert fl.l_n == Vertex(-1, 1)
    assert fl.r_n == Vertex(3, 1)
    assert fl.slice_size == 1
    assert fl.left_dist == 4.0  # (-1,1) wraps to (7,1), column 3
    assert fl.right_dist == 2.0
    assert fl.M_n == 4.0
    assert fl.triangle == frozenset(
        [
            Vertex(-1, 1),
            Vertex(1, 1),
            Vertex(3, 1),
            Vertex(0, 2),
            Vertex(2, 2),
            Vertex(1, 3),
        ]
    )


def test_flanks_errors():
    fk = fake_forest_one_column_tree()
    with pytest.raises(ValueError):
        flanks(fk, ROOT, 0)
    with pytest.raises(ValueError):
        flanks(fk, ROOT, 2)  # empty slice at level 2


def test_flank_left_distances_pools_all_roots():
    fo = stretch_forest(seed=7, W=16, M=8)
    n = 2
    pooled = flank_left_distances(fo, n)
    roots = [
        r for r in fo.window.boundary()
        if np.any(fo.root_x[n] == r.x)
    ]
    assert len(pooled) == len(roots)
    per_root = [flanks(fo, r, n).left_dist for r in roots]
    assert np.array_equal(pooled, np.asarray(per_root))


def test_cone_check_on_real_and_corrupted_forest():
    fo = stretch_forest(seed=9, W=8, M=8)
    for root in fo.window.boundary():
        assert cone_check(fo, root)
    bad = SimpleNamespace(
        window=fo.window, root_x=fo.root_x.copy(), node_values=fo.dist
    )
    bad.root_x[1, 4] = 0  # (9,1) cannot hang under root 0
    assert not cone_check(bad, ROOT)


def test_first_empty_level():
    fk = fake_forest_one_column_tree()
    assert first_empty_level(fk, ROOT) == 2
    assert first_empty_level(fk, Vertex(2, 0)) is None


# ---------------------------------------------------------------------------
# Confidence intervals and the flank bound


@given(
    st.integers(min_value=0, max_value=50),
    st.integers(min_value=1, max_value=50),
    st.floats(min_value=0.5, max_value=3.0),
)
def test_wilson_interval_is_the_score_interval(k, n, z):
    k = min(k, n)
    lo, hi = wilson_interval(k, n, z)
    assert 0.0 <= lo <= k / n <= hi <= 1.0
    # endpoints solve (p - phat)^2 * n = z^2 p (1 - p)
    phat = k / n
    qa, qb, qc = n + z * z, -(2 * n * phat + z * z), n * phat * phat
    disc = np.sqrt(qb * qb - 4 * qa * qc)
    assert np.allclose([(-qb - disc) / (2 * qa), (-qb + disc) / (2 * qa)],
                       [lo, hi], atol=1e-9)


def test_flank_bound_reports():
    low = np.full(200, 1.0)
    rep = flank_bound_test(low, n=4, kappa=2.0)
    assert rep.passed and rep.n_exceed == 0
    assert rep.threshold == 64.0
    assert "pass" in rep.line()
    high = np.full(200, 1e9)
    rep2 = flank_bound_test(high, n=4, kappa=2.0)
    assert not rep2.passed and rep2.frequency == 1.0
    assert "FAIL" in rep2.line()


def test_flank_bound_validation():
    with pytest.raises(ValueError):
        flank_bound_test(np.ones(200), n=4, kappa=1.0)
    with pytest.raises(ValueError):
        flank_bound_test(np.ones(50), n=4, kappa=2.0)


# ---------------------------------------------------------------------------
# Coverage, heights, survival


def test_coverage_partition_on_forest():
    fo = stretch_forest(seed=11)
    assert coverage_partition_check(fo, fo.window)
    bad = SimpleNamespace(window=fo.window, root_x=fo.root_x.copy())
    bad.root_x[3, 2] = 1  # odd label is not a root
    assert not coverage_partition_check(bad, fo.window)
    assert not coverage_partition_check(
        SimpleNamespace(window=fo.window, root_x=fo.root_x[:3]), fo.window
    )


def test_root_heights_match_level_profiles():
    fo = stretch_forest(seed=13, W=8, M=8)
    heights, censored = root_heights(fo)
    for j, root in enumerate(fo.window.boundary()):
        profile = [level_profile(fo, root, m) for m in range(1, 9)]
        expect = max((m for m, c in enumerate(profile, start=1) if c > 0), default=0)
        assert heights[j] == expect
        assert censored[j] == (profile[-1] > 0)
    assert truncated_mean_height(fo) == pytest.approx(float(np.mean(heights)))


def test_tail_height_estimate():
    heights = np.array([0, 1, 1, 2, 5, 5, 5, 8])
    surv = tail_height_estimate(heights, [1, 2, 5, 8])
    assert surv[1].probability == 7 / 8
    assert surv[2].probability == 5 / 8
    assert surv[5].probability == 4 / 8
    assert surv[8].probability == 1 / 8
    for pt in surv.values():
        assert pt.ci_low <= pt.probability <= pt.ci_high
    ps = [surv[n].probability for n in (1, 2, 5, 8)]
    assert ps == sorted(ps, reverse=True)
    with pytest.raises(ValueError):
        tail_height_estimate([], [1])


# ---------------------------------------------------------------------------
# KS and chi-square


def test_ks_accepts_true_exponential():
    u = hash_uniform_vec(99, [np.arange(5000, dtype=np.uint64)])
    sample = exp_from_uniform(u, 1.0)
    res = ks_test_exp1(sample)
    assert res.p_value > 1e-3
    assert res.n_samples == 5000


def test_ks_rejects_wrong_scale():
    u = hash_uniform_vec(99, [np.arange(5000, dtype=np.uint64)])
    res = ks_test_exp1(exp_from_uniform(u, 2.0))
    assert res.p_value < 1e-6


def test_ks_validation():
    with pytest.raises(ValueError):
        ks_test_exp1([1.0] * 5)
    with pytest.raises(ValueError):
        ks_test_exp1([0.0] * 20)


def test_ks_statistic_known_value():
    # single observation at the exponential median, n >= 10 via repeats:
    # for a constant sample at log 2 the empirical CDF steps from 0 to 1,
    # so D = 1/2 exactly
    res = ks_test_exp1(np.full(16, np.log(2.0)))
    assert res.statistic == pytest.approx(0.5)


def test_chi_square_identical_histograms():
    h = {0: 40, 1: 30, 2: 30}
    res = chi_square_compare(h, h)
    assert (res.statistic, res.p_value) == (0.0, 1.0)


def test_chi_square_detects_shift():
    res = chi_square_compare({0: 100, 1: 100}, {0: 160, 1: 40})
    assert res.p_value < 1e-6
    assert res.dof == 1


def test_chi_square_pools_sparse_bins():
    a = {0: 50, 1: 50, 2: 2, 3: 1}
    b = {0: 48, 1: 52, 2: 1, 3: 2}
    res = chi_square_compare(a, b)
    assert res.n_bins < 4
    assert res.p_value > 0.5


def test_chi_square_mismatched_sequences():
    with pytest.raises(ValueError):
        chi_square_compare([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        chi_square_compare({}, {})


def test_chi_square_accepts_union_of_keys():
    res = chi_square_compare({0: 50, 1: 50}, {0: 50, 2: 50})
    assert res.n_bins >= 2


def test_histogram():
    assert histogram([1, 1, 2.0, 5]) == {1: 2, 2: 1, 5: 1}
    assert histogram([]) == {}
