import json

import numpy as np
import pytest

from sidlalab.coupling import (
    AuxClockField,
    CoupledRing,
    RingKind,
    auto_repeats_mode,
    forests_match,
    gaps_csv_text,
    generate_rings,
    interring_gaps,
    pooled_gaps,
    replay,
    verify_coupling,
)
from sidlalab.errors import CouplingFault
from sidlalab.fpp import WeightField, WeightProfile, build_forest
from sidlalab.lattice import Vertex, Window


def make_rings(seed=1, W=8, M=4, repeats="full", horizon_factor=1.5):
    win = Window(W, M)
    field = WeightField(seed, WeightProfile.STRETCH, win)
    forest = build_forest(field)
    aux = AuxClockField(seed, win, WeightProfile.STRETCH)
    horizon = forest.max_dist * horizon_factor
    rings = generate_rings(forest, field, aux, horizon, repeats=repeats)
    return win, forest, rings, horizon


def test_rings_are_time_sorted_with_positive_times():
    _, _, rings, horizon = make_rings()
    times = [r.time for r in rings]
    assert times == sorted(times)
    assert all(t > 0.0 for t in times)
    # interior rings and auxiliary repeats respect the horizon; only the
    # base firing of a boundary edge may land beyond it
    for r in rings:
        if r.kind is RingKind.INTERIOR:
            assert r.time <= horizon


def test_interior_rings_cover_every_vertex_once():
    win, forest, rings, _ = make_rings()
    targets = [win.canonicalize(r.target) for r in rings if r.kind is RingKind.INTERIOR]
    assert len(targets) == len(set(targets)) == win.W * win.M


def test_interior_ring_times_are_forest_distances():
    win, forest, rings, _ = make_rings()
    for r in rings:
        if r.kind is RingKind.INTERIOR:
            v = win.canonicalize(r.target)
            assert r.time == forest.distance(v)  # bit-exact by construction


def test_paths_start_at_their_site():
    _, _, rings, _ = make_rings()
    for r in rings:
        assert r.path[0].tail == r.site
        for e, f in zip(r.path, r.path[1:]):
            assert f.tail.y == e.tail.y + 1


def test_horizon_below_coverage_rejected():
    win = Window(8, 4)
    field = WeightField(1, WeightProfile.STRETCH, win)
    forest = build_forest(field)
    aux = AuxClockField(1, win, WeightProfile.STRETCH)
    with pytest.raises(ValueError):
        generate_rings(forest, field, aux, forest.max_dist * 0.5, repeats="full")


def test_repeats_mode_validation():
    win = Window(8, 4)
    field = WeightField(1, WeightProfile.STRETCH, win)
    forest = build_forest(field)
    aux = AuxClockField(1, win, WeightProfile.STRETCH)
    with pytest.raises(ValueError):
        generate_rings(forest, field, aux, forest.max_dist * 2, repeats="some")


def test_auto_repeats_mode_switches_on_volume():
    assert auto_repeats_mode(Window(8, 4), 100.0) == "full"
    assert auto_repeats_mode(Window(1024, 64), 1e9) == "base"


def test_replay_reproduces_forest_bit_exactly():
    for seed in (1, 2, 3, 4, 5):
        win, forest, rings, _ = make_rings(seed=seed)
        state = replay(rings, win)
        assert forests_match(forest, state), seed
        assert np.array_equal(state.occ_time[1:], forest.dist[1:])


def test_replay_base_mode_matches_too():
    win, forest, rings, _ = make_rings(seed=7, W=16, M=8, repeats="base")
    state = replay(rings, win)
    assert forests_match(forest, state)


def test_replay_detects_out_of_order_paths():
    win, forest, rings, _ = make_rings(seed=3)
    interiors = [i for i, r in enumerate(rings) if r.kind is RingKind.INTERIOR
                 and len(r.path) > 1]
    # move a deep ring before everything else so its path prefix is missing
    i = interiors[-1]
    broken = [rings[i]] + rings[:i] + rings[i + 1:]
    with pytest.raises(CouplingFault):
        replay(broken, win)


def test_gap_statistics_exp1():
    win, forest, rings, horizon = make_rings(seed=11, W=16, M=6)
    sites, gaps = pooled_gaps(rings, win, horizon=horizon)
    assert len(gaps) > 500
    assert abs(float(np.mean(gaps)) - 1.0) < 0.1
    # lag-1 autocorrelation of pooled gaps is consistent with independence
    g = gaps - np.mean(gaps)
    rho = float(np.sum(g[1:] * g[:-1]) / np.sum(g * g))
    assert abs(rho) < 3.0 / np.sqrt(len(gaps)) + 0.05, rho


def test_single_site_gaps_match_pooled():
    win, forest, rings, horizon = make_rings(seed=11, W=16, M=6)
    sites, gaps = pooled_gaps(rings, win, horizon=horizon)
    g0 = interring_gaps(rings, Vertex(0, 0), horizon=horizon)
    assert np.array_equal(gaps[sites == 0], g0)


def test_interring_gaps_needs_two_rings():
    with pytest.raises(ValueError):
        interring_gaps([], Vertex(0, 0))


def test_verify_coupling_report():
    rep = verify_coupling(2, Window(16, 8), repeats="full")
    assert rep.forest_equal
    assert rep.n_gaps >= 10
    assert rep.ks_p > 1e-4
    assert abs(float(np.mean(rep.gap_sample)) - 1.0) < 0.1
    payload = json.loads(rep.json_text())
    assert set(payload) == {"forest_equal", "n_gaps", "ks_stat", "ks_p",
                            "censored_count"}
    assert payload["forest_equal"] is True
    assert payload["n_gaps"] == rep.n_gaps
    assert payload["ks_p"] == pytest.approx(rep.ks_p)


def test_verify_coupling_auto_mode():
    rep = verify_coupling(4, Window(8, 4), repeats="auto")
    assert rep.forest_equal


def test_gaps_csv_shape():
    sites = np.array([0, 0, 2])
    gaps = np.array([0.5, 1.25, 2.0])
    text = gaps_csv_text(sites, gaps)
    lines = text.strip().split("\n")
    assert lines[0] == "site_x,gap"
    assert lines[1] == "0,0.5"
    assert len(lines) == 4


def test_coupling_invariant_under_repeat_mode():
    """Interior rings, and hence the replayed forest, are identical whether
    or not boundary repeat streams are generated."""
    win, forest, rings_full, _ = make_rings(seed=9, repeats="full")
    _, _, rings_base, _ = make_rings(seed=9, repeats="base")
    _, _, rings_none, _ = make_rings(seed=9, repeats="none")
    def interiors(rs):
        return [(r.site, r.time, r.path) for r in rs if r.kind is RingKind.INTERIOR]
    assert interiors(rings_full) == interiors(rings_base) == interiors(rings_none)
    assert len(rings_full) > len(rings_base) > len(rings_none)
