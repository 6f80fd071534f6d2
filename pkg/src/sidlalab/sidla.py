"""Stretched internal DLA on the window.

Particles drop onto a uniformly random boundary site at rate W (one ring of
the global clock per particle) and walk upward through the tree grown at
that site: at each vertex the walker flips a fair coin for a direction,
follows the edge if it already belongs to its own tree, claims the head if
that vertex is free and inside the window, and otherwise vanishes.  A tree
therefore adds at most one vertex per ring, and the probability that a
given free boundary edge at level h is claimed in one ring is exactly
``2**-h``: the coin path to its tail is forced, one choice per level.

Two drivers produce the same process law:

* ``rings``: the literal event loop, one coin-walk per ring.  Faithful but
  needs on the order of ``W * 2**M`` rings to cover the window, since the
  top level extends with probability ``2**-M`` per ring.
* ``jumps``: exponential-clock thinning.  Each free edge at level h rings
  independently at rate ``2**-h`` (rings arrive at rate W and the walk
  claims the edge with probability ``2**-h / W``), so the next extension
  can be sampled directly.  Exactly ``W * M`` events cover the window.

Both drivers share one state layout, draw from tagged counter-hash streams
keyed by (seed, counter), and record an event log suitable for CSV export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .hashing import (
    CLOCK_STREAM,
    COIN_STREAM,
    JUMP_STREAM,
    exp_from_uniform,
    hash_u64,
    hash_uniform,
)
from .lattice import Dir, Edge, Vertex, Window, edge_str, head, in_edges

DEFAULT_RING_BUDGET_FACTOR = 10_000

# Largest cap for which the literal driver fits comfortably inside the
# default ring budget (expected rings ~ W * 2**(M+1) vs budget 1e4 * W * M).
AUTO_LITERAL_MAX_CAP = 12


class SimulationLimitError(RuntimeError):
    """The ring budget ran out before the window was covered."""


@dataclass
class SidlaState:
    """Occupied set, tree structure and clock of one particle run.

    Arrays have shape (M + 1, W) like a geodesic forest; root_x is -1 on
    vertices not yet claimed.  occ_time holds the clock value at which
    each vertex was claimed (0 on the boundary).
    """

    window: Window
    root_x: np.ndarray
    parent_dir: np.ndarray
    occ_time: np.ndarray
    seed: int = 0
    clock: float = 0.0
    n_rings: int = 0
    n_occupied: int = 0
    censored: set = field(default_factory=set)
    events: list = field(default_factory=list)
    log_events: bool = False

    value_key = "occupancy_time"
    profile_label = "sidla"

    @property
    def node_values(self) -> np.ndarray:
        return self.occ_time

    def is_covered(self) -> bool:
        return self.n_occupied >= self.window.W * self.window.M

    def occupied(self, v: Vertex) -> bool:
        v = self.window.canonicalize(v)
        return int(self.root_x[v.y, self.window.column_of(v)]) >= 0

    def owner_of(self, v: Vertex) -> int:
        v = self.window.canonicalize(v)
        return int(self.root_x[v.y, self.window.column_of(v)])


def new_state(window: Window, seed: int = 0, log_events: bool = False) -> SidlaState:
    W, M = window.W, window.M
    root_x = np.full((M + 1, W), -1, dtype=np.int64)
    parent_dir = np.full((M + 1, W), -1, dtype=np.int8)
    occ_time = np.full((M + 1, W), np.nan, dtype=np.float64)
    root_x[0] = 2 * np.arange(W, dtype=np.int64)
    occ_time[0] = 0.0
    return SidlaState(window, root_x, parent_dir, occ_time, seed=seed,
                      log_events=log_events)


def edge_in_tree(state: SidlaState, root_x_value: int, e: Edge) -> bool:
    """True if e is the parent edge of its head in the tree of that root."""
    a = state.window.canonicalize(head(e))
    if a.y > state.window.M:
        return False
    j = state.window.column_of(a)
    return (
        int(state.root_x[a.y, j]) == root_x_value
        and int(state.parent_dir[a.y, j]) == int(e.dir)
    )


def walk_particle(
    state: SidlaState, root_x_value: int, coin_at: Callable[[int], Dir]
) -> Edge | None:
    """Run one coin-walk from the given boundary root.

    Returns the claimed edge, or None if the particle vanished.  coin_at
    maps the step index to a direction; the production drivers plug in a
    counter-hash stream, tests can pass explicit sequences.
    """
    win = state.window
    v = win.canonicalize(Vertex(root_x_value, 0))
    step = 0
    while True:
        d = coin_at(step)
        step += 1
        e = Edge(v, d)
        a = win.canonicalize(head(e))
        if a.y <= win.M and edge_in_tree(state, root_x_value, e):
            v = a
            continue
        if a.y <= win.M and not state.occupied(a):
            return e
        return None


def apply_extension(state: SidlaState, root_x_value: int, e: Edge, time: float) -> None:
    """Claim the head of e for the given root at the given clock value."""
    win = state.window
    a = win.canonicalize(head(e))
    j = win.column_of(a)
    if int(state.root_x[a.y, j]) >= 0:
        raise ValueError(f"vertex {a} already occupied")
    state.root_x[a.y, j] = root_x_value
    state.parent_dir[a.y, j] = int(e.dir)
    state.occ_time[a.y, j] = time
    state.n_occupied += 1
    if a.y == win.M:
        state.censored.add(root_x_value)


def hash_coin_stream(seed: int, ring_index: int) -> Callable[[int], Dir]:
    return lambda step: Dir(hash_u64(seed, COIN_STREAM, ring_index, step) & 1)


def ring_arrival(seed: int, ring_index: int, W: int) -> tuple[float, int]:
    """Clock gap and boundary site of one ring: Exp(W) gap, uniform site."""
    gap = float(exp_from_uniform(hash_uniform(seed, CLOCK_STREAM, ring_index, 0), W))
    u = hash_uniform(seed, CLOCK_STREAM, ring_index, 1)
    site = min(int(u * W), W - 1)
    return gap, 2 * site


def next_ring(state: SidlaState, seed: int) -> tuple[int, Edge | None]:
    """Advance the literal driver by one ring; returns (site_x, claimed edge)."""
    k = state.n_rings
    gap, site_x = ring_arrival(seed, k, state.window.W)
    state.clock += gap
    state.n_rings = k + 1
    e = walk_particle(state, site_x, hash_coin_stream(seed, k))
    if e is not None:
        apply_extension(state, site_x, e, state.clock)
    if state.log_events:
        state.events.append(
            (site_x, state.clock, "extend" if e is not None else "vanish",
             edge_str(e) if e is not None else "")
        )
    return site_x, e


def _run_rings(state: SidlaState, seed: int, max_rings: int) -> SidlaState:
    while not state.is_covered():
        if state.n_rings >= max_rings:
            raise SimulationLimitError(
                f"window not covered after {max_rings} rings "
                f"(W={state.window.W}, M={state.window.M}); "
                f"the jumps driver has no such limit"
            )
        next_ring(state, seed)
    return state


def _edge_code(window: Window, e: Edge) -> int:
    return (e.tail.y * window.period + e.tail.x) * 2 + int(e.dir)


def _decode_edge(window: Window, code: int) -> Edge:
    d = Dir(code & 1)
    xy = code >> 1
    return Edge(Vertex(xy % window.period, xy // window.period), d)


def _run_jumps(state: SidlaState, seed: int) -> SidlaState:
    """Sample extension events directly from the free-edge clocks.

    Keeps free edges grouped by level (all edges at a level share one
    rate); each event picks a level proportionally to count * rate and
    then a uniform edge within the level.
    """
    win = state.window
    W, M = win.W, win.M
    level_rate = [0.0] + [math.ldexp(1.0, -h) for h in range(1, M + 1)]
    free: list[list[int]] = [[] for _ in range(M + 1)]
    pos: dict[int, int] = {}

    def add_edge(e: Edge) -> None:
        code = _edge_code(win, e)
        lst = free[e.level]
        pos[code] = len(lst)
        lst.append(code)

    def remove_edge(code: int, level: int) -> None:
        i = pos.pop(code)
        lst = free[level]
        last = lst.pop()
        if last != code:
            lst[i] = last
            pos[last] = i

    for v in win.boundary():
        for d in (Dir.LEFT, Dir.RIGHT):
            add_edge(Edge(v, d))

    total = W * M
    k = 0
    while state.n_occupied < total:
        rate_sum = 0.0
        for h in range(1, M + 1):
            rate_sum += len(free[h]) * level_rate[h]
        state.clock += float(
            exp_from_uniform(hash_uniform(seed, JUMP_STREAM, k, 0), rate_sum)
        )
        r = hash_uniform(seed, JUMP_STREAM, k, 1) * rate_sum
        chosen = 0
        acc = 0.0
        for h in range(1, M + 1):
            c = len(free[h])
            if c:
                chosen = h
                acc += c * level_rate[h]
                if r < acc:
                    break
        lst = free[chosen]
        i = min(int(hash_uniform(seed, JUMP_STREAM, k, 2) * len(lst)), len(lst) - 1)
        e = _decode_edge(win, lst[i])
        root = state.owner_of(e.tail)
        a = win.canonicalize(head(e))
        apply_extension(state, root, e, state.clock)
        if state.log_events:
            state.events.append((root, state.clock, "extend", edge_str(e)))
        for dead in in_edges(a, win):
            code = _edge_code(win, dead)
            if code in pos:
                remove_edge(code, a.y)
        if a.y < M:
            for d2 in (Dir.LEFT, Dir.RIGHT):
                if not state.occupied(head(Edge(a, d2))):
                    add_edge(Edge(a, d2))
        k += 1
    state.n_rings = k
    return state


def run_until_covered(
    window: Window,
    seed: int,
    method: str = "auto",
    ring_budget_factor: int = DEFAULT_RING_BUDGET_FACTOR,
    log_events: bool = False,
) -> SidlaState:
    """Run the particle system until every window vertex is claimed.

    method is "rings" (literal event loop), "jumps" (clock thinning) or
    "auto", which picks rings for small caps and jumps otherwise.  The
    rings driver stops with SimulationLimitError if coverage takes more
    than ring_budget_factor * W * M rings.
    """
    if method not in ("auto", "rings", "jumps"):
        raise ConfigError(f"unknown method {method!r}; use auto, rings or jumps")
    state = new_state(window, seed=seed, log_events=log_events)
    if method == "auto":
        method = "rings" if window.M <= AUTO_LITERAL_MAX_CAP else "jumps"
    if method == "rings":
        return _run_rings(state, seed, ring_budget_factor * window.W * window.M)
    return _run_jumps(state, seed)


def events_csv_text(state: SidlaState) -> str:
    """Ring event log as CSV with columns site_x,time,outcome,edge."""
    lines = ["site_x,time,outcome,edge"]
    for site_x, t, outcome, edge in state.events:
        tail = f'"{edge}"' if edge else ""
        lines.append(f"{site_x},{format(t, '.17g')},{outcome},{tail}")
    return "\n".join(lines) + "\n"
