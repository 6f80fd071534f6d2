"""Ring construction from a weight sample, and its particle replay.

The bridge between the two pictures: given a geodesic forest, every
monotone path from a boundary site through its own tree is assigned a ring
of that site's clock.  A path that stays inside the tree fires once, at
the path's accumulated weight; a path that exits through an outer boundary
edge fires at its accumulated weight and then again at each arrival of an
auxiliary clock attached to that edge (rate ``2**-level``), restarted at
the base firing and truncated at the horizon.  Replaying the assigned
rings through the particle rules reproduces the forest exactly: interior
rings perform the extensions, in the order of the passage times, and
boundary repeats all vanish.  Passage sums are accumulated parent-first in
both the forest program and the ring generator, so occupancy times match
distances bit for bit, not merely to rounding.

The repeat streams are where all the volume is: a free edge at level h
fires about ``rate * horizon`` times, and with the stretch profile the
horizon scales like ``2**M``.  Callers that only need the forest identity
can therefore drop to ``repeats="base"`` (one firing per boundary edge),
which leaves the replayed occupancy untouched; gap statistics need
``repeats="full"`` and a window small enough for the horizon to be tame.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigError, CouplingFault
from .fpp import (
    GeodesicForest,
    WeightField,
    WeightProfile,
    build_forest,
    incoming_tail_columns,
)
from .hashing import AUX_STREAM, exp_from_uniform, hash_uniform
from .lattice import Dir, Edge, Vertex, Window, edge_str, head
from .sidla import SidlaState, apply_extension, edge_in_tree, new_state

REPEAT_MODES = ("full", "base", "none")

# Soft budget on generated rings used by auto_repeats_mode; full repeat
# streams produce about W * horizon rings.
AUTO_REPEAT_RING_BUDGET = 5_000_000


@dataclass(frozen=True)
class AuxClockField:
    """Deterministic Poisson arrival streams, one per edge.

    Arrivals for an edge are the partial sums of counter-hashed
    exponential gaps at the edge's level rate, independent of the weight
    field by stream tag.
    """

    seed: int
    window: Window
    profile: WeightProfile = WeightProfile.STRETCH

    def offsets(self, e: Edge, budget: float) -> list[float]:
        """Arrival offsets (cumulative, ascending) not exceeding budget."""
        if budget <= 0.0:
            return []
        tail = self.window.canonicalize(e.tail)
        rate = self.profile.rate(e.level)
        out: list[float] = []
        acc = 0.0
        k = 0
        while True:
            u = hash_uniform(self.seed, AUX_STREAM, tail.x, tail.y, int(e.dir), k)
            acc += float(exp_from_uniform(u, rate))
            if acc > budget:
                return out
            out.append(acc)
            k += 1


class RingKind(IntEnum):
    INTERIOR = 0
    BOUNDARY_REPEAT = 1


@dataclass(frozen=True)
class CoupledRing:
    """One clock ring of a boundary site with its assigned particle path."""

    site: Vertex
    time: float
    path: tuple[Edge, ...]
    kind: RingKind

    @property
    def target(self) -> Vertex:
        return head(self.path[-1])


def auto_repeats_mode(window: Window, horizon: float) -> str:
    """Choose full repeat streams when their volume fits the ring budget."""
    return "full" if window.W * horizon <= AUTO_REPEAT_RING_BUDGET else "base"


def generate_rings(
    forest: GeodesicForest,
    field: WeightField,
    aux: AuxClockField,
    horizon: float,
    repeats: str = "full",
) -> list[CoupledRing]:
    """Assign rings for every site of the window, sorted by time.

    Interior rings (one per tree vertex) are always produced.  Boundary
    edges of each tree produce their base firing unconditionally and, with
    repeats="full", the auxiliary arrivals up to the horizon.  Edges whose
    head lies above the cap have no home in the window and are skipped;
    their total rate is at most (M + 2) * 2**-(M+1) per site.
    """
    if repeats not in REPEAT_MODES:
        raise ConfigError(f"unknown repeats mode {repeats!r}; use full, base or none")
    win = forest.window
    W, M = win.W, win.M
    max_dist = forest.max_dist
    if horizon < max_dist:
        raise ValueError(
            f"horizon {horizon} below forest max distance {max_dist}; "
            f"rings after coverage would be censored"
        )
    weights = [None] + [field.incoming_weights(y) for y in range(1, M + 1)]
    children: list[list[list[tuple[int, Dir]]]] = [
        [[] for _ in range(W)] for _ in range(M)
    ]
    for y in range(1, M + 1):
        cols_r, cols_l = incoming_tail_columns(W, y)
        pd_row = forest.parent_dir[y]
        for j in range(W):
            d = Dir(int(pd_row[j]))
            tail_col = int(cols_l[j]) if d is Dir.LEFT else int(cols_r[j])
            children[y - 1][tail_col].append((j, d))

    rings: list[CoupledRing] = []
    for j0 in range(W):
        site = Vertex(2 * j0, 0)
        stack: list[tuple[Vertex, int, float, tuple[Edge, ...]]] = [
            (site, j0, 0.0, ())
        ]
        while stack:
            v, j, lam, path = stack.pop()
            if path:
                rings.append(CoupledRing(site, lam, path, RingKind.INTERIOR))
            if v.y >= M:
                continue
            kids = children[v.y][j]
            for d in (Dir.LEFT, Dir.RIGHT):
                e = Edge(v, d)
                a = win.canonicalize(head(e))
                ja = win.column_of(a)
                w_r, w_l = weights[a.y]
                w = float(w_l[ja]) if d is Dir.LEFT else float(w_r[ja])
                child_col = next((jc for jc, dc in kids if dc is d), None)
                if child_col is not None:
                    stack.append((a, child_col, lam + w, path + (e,)))
                    continue
                if repeats == "none":
                    continue
                t_base = lam + w
                bpath = path + (e,)
                rings.append(CoupledRing(site, t_base, bpath, RingKind.BOUNDARY_REPEAT))
                if repeats == "full" and t_base < horizon:
                    for off in aux.offsets(e, horizon - t_base):
                        rings.append(
                            CoupledRing(site, t_base + off, bpath,
                                        RingKind.BOUNDARY_REPEAT)
                        )
    rings.sort(key=lambda r: (r.time, r.site.x, len(r.path), int(r.kind), r.path))
    return rings


def replay(rings: list[CoupledRing], window: Window) -> SidlaState:
    """Run the assigned rings through the particle rules, in order.

    Interior rings whose final edge's head is free extend the tree; every
    other ring vanishes.  An interior ring whose path prefix is not in the
    current tree contradicts the construction and raises CouplingFault.
    """
    state = new_state(window, log_events=True)
    for ring in rings:
        state.n_rings += 1
        state.clock = ring.time
        outcome = "vanish"
        claimed = ""
        if ring.kind is RingKind.INTERIOR:
            root_val = ring.site.x
            for e in ring.path[:-1]:
                if not edge_in_tree(state, root_val, e):
                    raise CouplingFault(
                        f"ring at t={ring.time} site={ring.site.x}: path edge "
                        f"{edge_str(e)} not in the current tree"
                    )
            last = ring.path[-1]
            a = window.canonicalize(head(last))
            if not state.occupied(a):
                apply_extension(state, root_val, last, ring.time)
                outcome = "extend"
                claimed = edge_str(last)
        if state.log_events:
            state.events.append((ring.site.x, ring.time, outcome, claimed))
    return state


def interring_gaps(rings, site, horizon: float | None = None) -> np.ndarray:
    """Successive ring-time differences at one boundary site."""
    site_x = site.x if isinstance(site, Vertex) else int(site)
    times = [r.time for r in rings if r.site.x == site_x
             and (horizon is None or r.time <= horizon)]
    if len(times) < 2:
        raise ValueError(f"need >= 2 rings at site {site_x}, found {len(times)}")
    return np.diff(np.asarray(times, dtype=np.float64))


def pooled_gaps(rings, window: Window, horizon: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gaps at every site pooled in site order; returns (site_x, gap) arrays."""
    times: dict[int, list[float]] = {2 * j: [] for j in range(window.W)}
    for r in rings:
        if horizon is None or r.time <= horizon:
            times[r.site.x].append(r.time)
    sites: list[int] = []
    gaps: list[float] = []
    for x in sorted(times):
        ts = times[x]
        for i in range(1, len(ts)):
            sites.append(x)
            gaps.append(ts[i] - ts[i - 1])
    return np.asarray(sites, dtype=np.int64), np.asarray(gaps, dtype=np.float64)


@dataclass
class CouplingReport:
    """Outcome of one coupled construct-and-replay verification."""

    seed: int
    window: Window
    forest_equal: bool
    n_gaps: int
    ks_stat: float
    ks_p: float
    censored_count: int
    n_rings: int
    horizon: float
    gap_sites: np.ndarray
    gap_sample: np.ndarray

    def json_text(self) -> str:
        def num(v: float) -> str:
            return "null" if np.isnan(v) else format(v, ".17g")

        return (
            "{"
            f'"forest_equal": {"true" if self.forest_equal else "false"}, '
            f'"n_gaps": {self.n_gaps}, '
            f'"ks_stat": {num(self.ks_stat)}, '
            f'"ks_p": {num(self.ks_p)}, '
            f'"censored_count": {self.censored_count}'
            "}\n"
        )


def forests_match(forest: GeodesicForest, state: SidlaState) -> bool:
    """Edge-for-edge and time-for-time equality, times compared bit-exact."""
    return (
        np.array_equal(forest.root_x, state.root_x)
        and np.array_equal(forest.parent_dir, state.parent_dir)
        and np.array_equal(forest.dist, state.occ_time)
    )


def verify_coupling(
    seed: int,
    window: Window,
    horizon_factor: float = 1.5,
    profile: WeightProfile = WeightProfile.STRETCH,
    repeats: str = "full",
) -> CouplingReport:
    """Build a forest, assign its rings, replay them, compare the results.

    The horizon is horizon_factor times the forest's coverage time, so
    with full repeats the gap statistics keep mass after coverage.
    """
    from .analysis import ks_test_exp1

    field = WeightField(seed, profile, window)
    forest = build_forest(field)
    horizon = forest.max_dist * horizon_factor
    if repeats == "auto":
        repeats = auto_repeats_mode(window, horizon)
    aux = AuxClockField(seed, window, profile)
    rings = generate_rings(forest, field, aux, horizon, repeats=repeats)
    state = replay(rings, window)
    equal = forests_match(forest, state)
    sites, gaps = pooled_gaps(rings, window, horizon=horizon)
    if len(gaps) >= 10:
        ks = ks_test_exp1(gaps)
        ks_stat, ks_p = ks.statistic, ks.p_value
    else:
        ks_stat, ks_p = float("nan"), float("nan")
    censored = int(len(set(int(x) for x in forest.root_x[window.M])))
    return CouplingReport(
        seed=seed,
        window=window,
        forest_equal=equal,
        n_gaps=int(len(gaps)),
        ks_stat=float(ks_stat),
        ks_p=float(ks_p),
        censored_count=censored,
        n_rings=len(rings),
        horizon=float(horizon),
        gap_sites=sites,
        gap_sample=gaps,
    )


def gaps_csv_text(sites: np.ndarray, gaps: np.ndarray) -> str:
    lines = ["site_x,gap"]
    for x, g in zip(sites, gaps):
        lines.append(f"{int(x)},{format(float(g), '.17g')}")
    return "\n".join(lines) + "\n"
